#pragma once

#include "ctour/cluster.hpp"
#include "ctour/data.hpp"

#include <array>
#include <string_view>
#include <utility>
#include <vector>

namespace ctour {

enum class ProjectionMethod { pca, cmds, tsne };

inline constexpr std::array kAllProjections{ProjectionMethod::pca, ProjectionMethod::cmds, ProjectionMethod::tsne};

std::string_view to_string(ProjectionMethod m);
ProjectionMethod parse_projection(std::string_view s);

struct ProjectionParams {
    ProjectionMethod method = ProjectionMethod::pca;
    Metric metric = Metric::euclidean;  // cmds only
    double perplexity = 30.0;           // tsne only
    int iterations = 500;               // tsne only
    std::uint64_t seed = 0;

    bool operator==(const ProjectionParams&) const = default;
};

struct Embedding {
    Matrix coords;  // n x 2
    ProjectionParams params;
    std::pair<double, double> explained_variance{0.0, 0.0};  // pca only
    std::vector<double> kl_history;                          // tsne only, one value per iteration
};

// 2-D embedding of the rows of X for display.
Embedding project(const Matrix& X, const ProjectionParams& p);

// Classical (Torgerson) MDS from a symmetric distance matrix.
Matrix cmds_from_distances(const Matrix& distances);

// RMS discrepancy between two n x 2 configurations after the best
// translation, rotation, reflection and uniform scaling of b onto a.
double procrustes_residual(const Matrix& a, const Matrix& b);
double procrustes_residual(const Embedding& a, const Embedding& b);

}  // namespace ctour
