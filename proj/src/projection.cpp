#include "ctour/projection.hpp"

#include "ctour/error.hpp"
#include "ctour/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace ctour {

std::string_view to_string(ProjectionMethod m) {
    switch (m) {
        case ProjectionMethod::pca: return "pca";
        case ProjectionMethod::cmds: return "cmds";
        case ProjectionMethod::tsne: return "tsne";
    }
    return "?";
}

ProjectionMethod parse_projection(std::string_view s) {
    for (auto m : kAllProjections) {
        if (to_string(m) == s) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown projection '" + std::string(s) + "'");
}

namespace {

// Flip v so its largest-magnitude entry (first one on ties) is positive.
void canonical_sign(Eigen::Ref<Vector> v) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    }
    if (v.size() > 0 && v(arg) < 0) v = -v;
}

// Top-2 eigenpairs of a symmetric matrix, largest first. Missing components
// (matrix of size 1) come back as zero vectors.
std::pair<Matrix, Vector> top_two_eigen(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(S);
    const Eigen::Index m = S.rows();
    Matrix vecs = Matrix::Zero(m, 2);
    Vector vals = Vector::Zero(2);
    for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, m); ++c) {
        vals(c) = solver.eigenvalues()(m - 1 - c);
        vecs.col(c) = solver.eigenvectors().col(m - 1 - c);
        canonical_sign(vecs.col(c));
    }
    return {vecs, vals};
}

Embedding pca(const Matrix& X) {
    const double n = static_cast<double>(X.rows());
    const Matrix centered = X.rowwise() - X.colwise().mean();
    const Matrix cov = centered.transpose() * centered / std::max(1.0, n - 1.0);
    auto [vecs, vals] = top_two_eigen(cov);
    Embedding e;
    e.coords = centered * vecs;
    const double total = cov.trace();
    if (total > 0) {
        e.explained_variance = {std::max(0.0, vals(0)) / total, std::max(0.0, vals(1)) / total};
    }
    return e;
}

void binary_search_perplexity(const Matrix& sq_dist, double perplexity, Matrix& P) {
    const Eigen::Index n = sq_dist.rows();
    const double target = std::log(perplexity);
    P = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0, lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        Vector row(n);
        for (int it = 0; it < 200; ++it) {
            double sum = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                row(j) = j == i ? 0.0 : std::exp(-sq_dist(i, j) * beta);
                sum += row(j);
            }
            if (!(sum > 0)) sum = 1e-300;
            double entropy = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double pj = row(j) / sum;
                if (pj > 1e-300) entropy -= pj * std::log(pj);
            }
            row /= sum;
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                lo = beta;
                beta = std::isfinite(hi) ? (beta + hi) / 2 : beta * 2;
            } else {
                hi = beta;
                beta = std::isfinite(lo) ? (beta + lo) / 2 : beta / 2;
            }
        }
        P.row(i) = row.transpose();
    }
}

Embedding tsne(const Matrix& X, const ProjectionParams& p) {
    const Eigen::Index n = X.rows();
    Matrix sq(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) sq(i, j) = (X.row(i) - X.row(j)).squaredNorm();
    }
    Matrix P;
    binary_search_perplexity(sq, p.perplexity, P);
    P = (P + P.transpose()).eval() / (2.0 * static_cast<double>(n));
    P = P.cwiseMax(1e-12);
    for (Eigen::Index i = 0; i < n; ++i) P(i, i) = 0;

    // PCA initialisation rescaled to a small spread. The seed only matters
    // when the data has no spread at all.
    Matrix Y = pca(X).coords;
    Rng rng(mix_seed(p.seed, 0x75e));
    double sd = 0;
    {
        const Vector c0 = Y.col(0).array() - Y.col(0).mean();
        sd = std::sqrt(c0.squaredNorm() / static_cast<double>(n));
    }
    if (sd > 0) {
        Y *= 1e-4 / sd;
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            Y(i, 0) = 1e-4 * rng.normal();
            Y(i, 1) = 1e-4 * rng.normal();
        }
    }

    const int iterations = p.iterations;
    const int exaggeration_iters = std::min(250, iterations / 4);
    const double exaggeration = 12.0;
    const double learning_rate = std::max(static_cast<double>(n) / exaggeration / 4.0, 50.0);
    Matrix update = Matrix::Zero(n, 2);
    Matrix gains = Matrix::Ones(n, 2);
    Matrix num(n, n);
    Matrix grad(n, 2);
    Embedding e;
    e.kl_history.reserve(static_cast<std::size_t>(iterations));

    for (int it = 0; it < iterations; ++it) {
        const bool exaggerate = it < exaggeration_iters;
        const double momentum = exaggerate ? 0.5 : 0.8;
        double qsum = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            num(i, i) = 0;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v = 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
                num(i, j) = num(j, i) = v;
                qsum += 2 * v;
            }
        }
        const double scale = exaggerate ? exaggeration : 1.0;
        double kl = 0;
        grad.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = std::max(num(i, j) / qsum, 1e-12);
                kl += P(i, j) * std::log(P(i, j) / q);
                grad.row(i) += 4.0 * (scale * P(i, j) - q) * num(i, j) * (Y.row(i) - Y.row(j));
            }
        }
        e.kl_history.push_back(kl);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index c = 0; c < 2; ++c) {
                const bool same_sign = (grad(i, c) > 0) == (update(i, c) > 0);
                gains(i, c) = std::max(same_sign ? gains(i, c) * 0.8 : gains(i, c) + 0.2, 0.01);
                update(i, c) = momentum * update(i, c) - learning_rate * gains(i, c) * grad(i, c);
            }
        }
        Y += update;
        const Eigen::RowVectorXd mean = Y.colwise().mean();
        Y.rowwise() -= mean;
    }
    e.coords = Y;
    return e;
}

}  // namespace

Matrix cmds_from_distances(const Matrix& D) {
    const Eigen::Index n = D.rows();
    if (D.cols() != n) throw Error(ErrorCode::DimensionMismatch, "distance matrix must be square");
    const Matrix sq = D.array().square().matrix();
    const Matrix J = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    const Matrix B = -0.5 * J * sq * J;
    auto [vecs, vals] = top_two_eigen(B);
    Matrix coords(n, 2);
    for (Eigen::Index c = 0; c < 2; ++c) coords.col(c) = vecs.col(c) * std::sqrt(std::max(0.0, vals(c)));
    return coords;
}

Embedding project(const Matrix& X, const ProjectionParams& p) {
    if (X.rows() < 3) throw Error(ErrorCode::TooFewRows, "projection needs at least 3 rows");
    if (X.cols() < 1) throw Error(ErrorCode::InvalidArgument, "projection needs at least one feature");
    Embedding e;
    switch (p.method) {
        case ProjectionMethod::pca:
            e = pca(X);
            break;
        case ProjectionMethod::cmds:
            e.coords = cmds_from_distances(pairwise_distances(X, p.metric));
            break;
        case ProjectionMethod::tsne: {
            const double limit = (static_cast<double>(X.rows()) - 1.0) / 3.0;
            if (!(p.perplexity > 0) || !(p.perplexity < limit)) {
                throw Error(ErrorCode::PerplexityTooLarge, "perplexity must be below (n-1)/3 = " + std::to_string(limit));
            }
            if (p.iterations < 50) throw Error(ErrorCode::InvalidArgument, "t-SNE needs at least 50 iterations");
            e = tsne(X, p);
            break;
        }
    }
    e.params = p;
    if (!e.coords.allFinite()) throw Error(ErrorCode::InvalidArgument, "projection produced non-finite coordinates");
    return e;
}

double procrustes_residual(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "configurations differ in shape");
    }
    const double n = static_cast<double>(a.rows());
    if (n == 0) return 0.0;
    const Matrix A = a.rowwise() - a.colwise().mean();
    const Matrix B = b.rowwise() - b.colwise().mean();
    const double bb = B.squaredNorm();
    const double aa = A.squaredNorm();
    if (!(bb > 0)) return std::sqrt(aa / n);
    // min over s, orthogonal R of |A - s B R|^2 = |A|^2 - (trace of singular values of B'A)^2 / |B|^2
    Eigen::JacobiSVD<Matrix> svd(B.transpose() * A);
    const double t = svd.singularValues().sum();
    return std::sqrt(std::max(0.0, aa - t * t / bb) / n);
}

double procrustes_residual(const Embedding& a, const Embedding& b) { return procrustes_residual(a.coords, b.coords); }

}  // namespace ctour
