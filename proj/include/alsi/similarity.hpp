#pragma once

// Asymmetric inclusion similarity between genes (columns of the incidence matrix)
// and the symmetric baselines it is compared against.

#include "alsi/core.hpp"
#include "alsi/ingest.hpp"

namespace alsi {

struct AsymmetricSimilarity {
    std::vector<std::string> genes;
    Matrix s;  // s(i, j) = |t_i and t_j| / |t_i|
};

struct SkewSplit {
    Matrix symmetric;
    Matrix skew;
};

struct NormDiagnostics {
    std::vector<double> norms;  // |t_i|, number of experiments where gene i is expressed
    Histogram histogram;
    double skew_max = 0.0;   // max |s_ij - s_ji|
    double skew_mean = 0.0;  // mean |s_ij - s_ji| over pairs i < j
};

/// Column norms |t_i| of a 0/1 matrix.
inline Vector column_norms(const Matrix& x) { return x.colwise().sum().transpose(); }

inline AsymmetricSimilarity asymmetric_similarity(const IncidenceMatrix& x) {
    const Vector norms = column_norms(x.x);
    for (Eigen::Index i = 0; i < norms.size(); ++i)
        if (norms(i) <= 0.0)
            throw ContractViolation("asymmetric_similarity: gene '" + x.genes[static_cast<std::size_t>(i)] +
                                    "' is never expressed (zero norm)");
    // For 0/1 data min(x_ki, x_kj) = x_ki * x_kj, so the intersection counts are X^T X.
    // Counts are small integers and therefore exact in double precision.
    const Matrix inter = x.x.transpose() * x.x;
    AsymmetricSimilarity out;
    out.genes = x.genes;
    // Divide rather than multiply by 1/|t_i|: containment must give exactly 1.
    out.s = inter.array().colwise() / norms.array();
    return out;
}

inline SkewSplit skew_split(const Matrix& s) {
    require_square(s, "skew_split");
    const Matrix t = s.transpose();
    return {0.5 * (s + t), 0.5 * (s - t)};
}

inline SkewSplit skew_split(const AsymmetricSimilarity& s) { return skew_split(s.s); }

inline NormDiagnostics norm_diagnostics(const IncidenceMatrix& x, const AsymmetricSimilarity& s, std::size_t bins) {
    if (bins < 1) throw ContractViolation("norm_diagnostics: bins must be >= 1");
    if (s.s.rows() != x.x.cols() || s.s.cols() != x.x.cols())
        throw ContractViolation("norm_diagnostics: similarity and incidence dimensions differ");
    NormDiagnostics d;
    const Vector norms = column_norms(x.x);
    d.norms.assign(norms.data(), norms.data() + norms.size());
    d.histogram = make_histogram(d.norms, bins);
    const Eigen::Index p = s.s.rows();
    double total = 0.0;
    std::size_t pairs = 0;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double a = std::abs(s.s(i, j) - s.s(j, i));
            d.skew_max = std::max(d.skew_max, a);
            total += a;
            ++pairs;
        }
    d.skew_mean = pairs ? total / static_cast<double>(pairs) : 0.0;
    return d;
}

enum class BaselineKind { Euclidean, Pearson };

/// Pairwise dissimilarities between the columns of m (genes across experiments).
/// Pearson distance is 1 - r.
inline Matrix baseline_distances(const Matrix& m, BaselineKind kind, Warnings* warnings = nullptr) {
    const Eigen::Index p = m.cols();
    Matrix d = Matrix::Zero(p, p);
    if (kind == BaselineKind::Euclidean) {
        const Vector sq = m.colwise().squaredNorm().transpose();
        const Matrix gram = m.transpose() * m;
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = i + 1; j < p; ++j) {
                const double v = std::sqrt(std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j)));
                d(i, j) = d(j, i) = v;
            }
        return d;
    }

    const Eigen::Index n = m.rows();
    if (n < 2) throw ContractViolation("baseline_distances: pearson needs at least 2 rows");
    Matrix z = m.rowwise() - m.colwise().mean();
    std::vector<bool> flat(static_cast<std::size_t>(p), false);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double nrm = z.col(j).norm();
        if (nrm == 0.0) {
            flat[static_cast<std::size_t>(j)] = true;
            z.col(j).setZero();
            warn(warnings, "baseline_distances: column " + std::to_string(j) +
                               " has zero variance; its correlations are set to 0");
        } else {
            z.col(j) /= nrm;
        }
    }
    const Matrix r = z.transpose() * z;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double rij = std::clamp(r(i, j), -1.0, 1.0);
            d(i, j) = d(j, i) = 1.0 - rij;
        }
    return d;
}

}  // namespace alsi
