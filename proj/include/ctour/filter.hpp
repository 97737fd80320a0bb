#pragma once

#include "ctour/data.hpp"

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace ctour {

// Row filter expressions:
//
//   expr   := term ('|' term)*
//   term   := factor ('&' factor)*
//   factor := '(' expr ')' | NAME op literal | bare
//   op     := '==' | '!=' | '<' | '<=' | '>' | '>='
//
// Literals are numbers or single-quoted strings. Feature names are matched
// case-insensitively; the name `id` refers to the row id unless a feature is
// called that. A bare word or quoted string selects rows whose id or any
// formatted value contains it (case-insensitive).
class FilterPredicate {
public:
    enum class Op { eq, ne, lt, le, gt, ge };

    struct Comparison {
        std::string feature;
        Op op = Op::eq;
        std::variant<double, std::string> literal;
    };
    struct Text {
        std::string needle;
    };
    struct Node;
    struct And {
        std::vector<std::shared_ptr<const Node>> children;
    };
    struct Or {
        std::vector<std::shared_ptr<const Node>> children;
    };
    struct Node {
        std::variant<Comparison, Text, And, Or> value;
    };

    explicit FilterPredicate(std::shared_ptr<const Node> root, std::string source)
        : root_(std::move(root)), source_(std::move(source)) {}

    const Node& root() const { return *root_; }
    const std::string& source() const { return source_; }

    // Names referenced by comparisons, in order of appearance.
    std::vector<std::string> referenced_features() const;

private:
    std::shared_ptr<const Node> root_;
    std::string source_;
};

FilterPredicate parse_filter(std::string_view text);

// Throws UnknownFeature before touching any row if a name does not resolve.
Selection evaluate(const FilterPredicate& pred, const Dataset& ds);

}  // namespace ctour
