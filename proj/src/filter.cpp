#include "ctour/filter.hpp"

#include "ctour/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace ctour {

namespace {

enum class Tok { lparen, rparen, and_, or_, op, word, string, end };

struct Token {
    Tok kind;
    std::string text;
    std::size_t pos;
    FilterPredicate::Op op = FilterPredicate::Op::eq;
};

bool is_special(char c) {
    return c == '(' || c == ')' || c == '&' || c == '|' || c == '<' || c == '>' || c == '=' || c == '!' ||
           c == '\'';
}

std::vector<Token> tokenize(std::string_view s) {
    using Op = FilterPredicate::Op;
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        auto two = [&](char next) { return i + 1 < s.size() && s[i + 1] == next; };
        if (c == '(') {
            out.push_back({Tok::lparen, "(", start});
            ++i;
        } else if (c == ')') {
            out.push_back({Tok::rparen, ")", start});
            ++i;
        } else if (c == '&') {
            i += two('&') ? 2 : 1;
            out.push_back({Tok::and_, "&", start});
        } else if (c == '|') {
            i += two('|') ? 2 : 1;
            out.push_back({Tok::or_, "|", start});
        } else if (c == '<' || c == '>') {
            const bool eq = two('=');
            Op op = c == '<' ? (eq ? Op::le : Op::lt) : (eq ? Op::ge : Op::gt);
            i += eq ? 2 : 1;
            out.push_back({Tok::op, std::string(s.substr(start, i - start)), start, op});
        } else if (c == '=' || c == '!') {
            if (!two('=')) {
                // A lone '=' is accepted as equality; a lone '!' is not an operator.
                if (c == '!') throw ParseError("expected '!='", start);
                ++i;
                out.push_back({Tok::op, "=", start, Op::eq});
            } else {
                i += 2;
                out.push_back({Tok::op, std::string(s.substr(start, 2)), start, c == '=' ? Op::eq : Op::ne});
            }
        } else if (c == '\'') {
            ++i;
            std::string text;
            bool closed = false;
            while (i < s.size()) {
                if (s[i] == '\'') {
                    if (i + 1 < s.size() && s[i + 1] == '\'') {
                        text.push_back('\'');
                        i += 2;
                        continue;
                    }
                    closed = true;
                    ++i;
                    break;
                }
                text.push_back(s[i++]);
            }
            if (!closed) throw ParseError("unterminated string literal", start);
            out.push_back({Tok::string, std::move(text), start});
        } else {
            while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && !is_special(s[i])) ++i;
            out.push_back({Tok::word, std::string(s.substr(start, i - start)), start});
        }
    }
    out.push_back({Tok::end, "", s.size()});
    return out;
}

std::optional<double> as_number(std::string_view text) {
    double v = 0;
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

class Parser {
public:
    using Node = FilterPredicate::Node;
    using NodePtr = std::shared_ptr<const Node>;

    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    NodePtr parse() {
        auto root = expr();
        if (peek().kind != Tok::end) throw ParseError("unexpected '" + peek().text + "'", peek().pos);
        return root;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
    }
    const Token& take() { return tokens_[pos_++]; }

    NodePtr expr() {
        std::vector<NodePtr> parts{term()};
        while (peek().kind == Tok::or_) {
            take();
            parts.push_back(term());
        }
        if (parts.size() == 1) return parts.front();
        return std::make_shared<Node>(Node{FilterPredicate::Or{std::move(parts)}});
    }

    NodePtr term() {
        std::vector<NodePtr> parts{factor()};
        while (peek().kind == Tok::and_) {
            take();
            parts.push_back(factor());
        }
        if (parts.size() == 1) return parts.front();
        return std::make_shared<Node>(Node{FilterPredicate::And{std::move(parts)}});
    }

    NodePtr factor() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::lparen: {
                take();
                auto inner = expr();
                if (peek().kind != Tok::rparen) throw ParseError("expected ')'", peek().pos);
                take();
                return inner;
            }
            case Tok::word:
            case Tok::string: {
                const Token name = take();
                if (peek().kind != Tok::op) {
                    return std::make_shared<Node>(Node{FilterPredicate::Text{name.text}});
                }
                if (name.kind == Tok::string) throw ParseError("expected a feature name", name.pos);
                const Token op = take();
                const Token lit = take();
                FilterPredicate::Comparison cmp;
                cmp.feature = name.text;
                cmp.op = op.op;
                if (lit.kind == Tok::string) {
                    cmp.literal = lit.text;
                } else if (lit.kind == Tok::word) {
                    if (auto v = as_number(lit.text)) cmp.literal = *v;
                    else cmp.literal = lit.text;
                } else {
                    throw ParseError("expected a literal after '" + op.text + "'", lit.pos);
                }
                return std::make_shared<Node>(Node{std::move(cmp)});
            }
            case Tok::end:
                throw ParseError("unexpected end of expression", t.pos);
            default:
                throw ParseError("unexpected '" + t.text + "'", t.pos);
        }
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

void collect_features(const FilterPredicate::Node& node, std::vector<std::string>& out) {
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, FilterPredicate::Comparison>) {
                out.push_back(v.feature);
            } else if constexpr (std::is_same_v<T, FilterPredicate::And> || std::is_same_v<T, FilterPredicate::Or>) {
                for (const auto& c : v.children) collect_features(*c, out);
            }
        },
        node.value);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string format_value(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
bool compare(const T& lhs, FilterPredicate::Op op, const T& rhs) {
    using Op = FilterPredicate::Op;
    switch (op) {
        case Op::eq: return lhs == rhs;
        case Op::ne: return lhs != rhs;
        case Op::lt: return lhs < rhs;
        case Op::le: return lhs <= rhs;
        case Op::gt: return lhs > rhs;
        case Op::ge: return lhs >= rhs;
    }
    return false;
}

// Resolved column: a feature index, or nullopt for the row id.
using Column = std::optional<std::size_t>;

Column resolve(const Dataset& ds, const std::string& name) {
    if (auto f = ds.find_feature(name)) return *f;
    if (lower(name) == "id") return std::nullopt;
    throw Error(ErrorCode::UnknownFeature, "unknown feature '" + name + "'");
}

bool eval_node(const FilterPredicate::Node& node, const Dataset& ds, std::size_t row,
               const std::vector<std::string>& lowered_text) {
    return std::visit(
        [&](const auto& v) -> bool {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, FilterPredicate::Comparison>) {
                const Column col = resolve(ds, v.feature);
                if (col) {
                    const double x = ds.values()(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(*col));
                    double rhs = 0;
                    if (const double* d = std::get_if<double>(&v.literal)) {
                        rhs = *d;
                    } else if (auto parsed = as_number(std::get<std::string>(v.literal))) {
                        rhs = *parsed;
                    } else {
                        throw Error(ErrorCode::InvalidArgument,
                                    "feature '" + v.feature + "' compared with a non-numeric literal");
                    }
                    return compare(x, v.op, rhs);
                }
                const std::string rhs = std::holds_alternative<double>(v.literal)
                                            ? format_value(std::get<double>(v.literal))
                                            : std::get<std::string>(v.literal);
                return compare(ds.row_ids()[row], v.op, rhs);
            } else if constexpr (std::is_same_v<T, FilterPredicate::Text>) {
                const std::string needle = lower(v.needle);
                return lowered_text[row].find(needle) != std::string::npos;
            } else if constexpr (std::is_same_v<T, FilterPredicate::And>) {
                for (const auto& c : v.children) {
                    if (!eval_node(*c, ds, row, lowered_text)) return false;
                }
                return true;
            } else {
                for (const auto& c : v.children) {
                    if (eval_node(*c, ds, row, lowered_text)) return true;
                }
                return false;
            }
        },
        node.value);
}

bool has_text(const FilterPredicate::Node& node) {
    return std::visit(
        [](const auto& v) -> bool {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, FilterPredicate::Text>) {
                return true;
            } else if constexpr (std::is_same_v<T, FilterPredicate::Comparison>) {
                return false;
            } else {
                return std::any_of(v.children.begin(), v.children.end(), [](const auto& c) { return has_text(*c); });
            }
        },
        node.value);
}

}  // namespace

std::vector<std::string> FilterPredicate::referenced_features() const {
    std::vector<std::string> out;
    collect_features(*root_, out);
    return out;
}

FilterPredicate parse_filter(std::string_view text) {
    bool blank = std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
    if (blank) throw ParseError("empty expression", 0);
    Parser parser(tokenize(text));
    return FilterPredicate(parser.parse(), std::string(text));
}

Selection evaluate(const FilterPredicate& pred, const Dataset& ds) {
    for (const auto& name : pred.referenced_features()) resolve(ds, name);
    // Searchable text per row: the id plus every formatted value, separated so
    // a needle cannot match across fields.
    std::vector<std::string> text(ds.rows());
    if (has_text(pred.root())) {
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            std::string line = lower(ds.row_ids()[r]);
            for (std::size_t c = 0; c < ds.features(); ++c) {
                line += '\x1f';
                line += format_value(ds.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            }
            text[r] = std::move(line);
        }
    }
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (eval_node(pred.root(), ds, r, text)) rows.push_back(r);
    }
    return Selection(std::move(rows));
}

}  // namespace ctour
