#pragma once

// Factorizations consumed by the rest of the pipeline. Eigen does the heavy
// lifting; this layer fixes a deterministic sign convention, validates inputs
// and turns solver failures into exceptions.

#include "alsi/core.hpp"

#include <Eigen/SVD>
#include <functional>
#include <sstream>

namespace alsi {

struct SvdResult {
    Matrix u;                   // left singular vectors (columns)
    std::vector<double> sigma;  // descending, non-negative
    Matrix v;                   // right singular vectors (columns)

    Vector sigma_vector() const { return Eigen::Map<const Vector>(sigma.data(), static_cast<Eigen::Index>(sigma.size())); }
    Matrix reconstruct() const { return u * sigma_vector().asDiagonal() * v.transpose(); }
};

struct EigResult {
    Matrix vectors;              // columns are eigenvectors
    std::vector<double> values;  // descending

    Vector value_vector() const { return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())); }
    Matrix reconstruct() const { return vectors * value_vector().asDiagonal() * vectors.transpose(); }
};

/// Polar factors S = K1 L = L K2.
struct PolarParts {
    Matrix k1;
    Matrix k2;
    Matrix l;
};

namespace detail {

// Flip each column so its largest-magnitude entry (lowest index on ties) is non-negative.
// Returns the applied signs so paired vectors can be flipped too.
inline std::vector<double> canonicalize_signs(Matrix& cols) {
    std::vector<double> signs(static_cast<std::size_t>(cols.cols()), 1.0);
    for (Eigen::Index j = 0; j < cols.cols(); ++j) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index i = 0; i < cols.rows(); ++i) {
            const double a = std::abs(cols(i, j));
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (cols.rows() > 0 && cols(best, j) < 0.0) {
            cols.col(j) = -cols.col(j);
            signs[static_cast<std::size_t>(j)] = -1.0;
        }
    }
    return signs;
}

}  // namespace detail

/// Thin SVD a = U diag(sigma) V^T with min(rows, cols) singular triplets.
inline SvdResult svd(const Matrix& a, const std::string& name = "matrix") {
    if (a.rows() < 1 || a.cols() < 1) throw ContractViolation("svd(" + name + "): empty matrix");
    require_finite(a, "svd(" + name + ")");

    Eigen::BDCSVD<Matrix> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success || !solver.matrixU().allFinite() || !solver.matrixV().allFinite())
        throw FactorizationError("svd(" + name + "): factorization did not converge");

    SvdResult r;
    r.u = solver.matrixU();
    r.v = solver.matrixV();
    const Vector& s = solver.singularValues();
    r.sigma.assign(s.data(), s.data() + s.size());
    // Eigen already returns descending values; clamp tiny negatives from round-off.
    for (double& x : r.sigma) x = std::max(x, 0.0);
    const auto signs = detail::canonicalize_signs(r.u);
    for (Eigen::Index j = 0; j < r.v.cols(); ++j)
        if (signs[static_cast<std::size_t>(j)] < 0) r.v.col(j) = -r.v.col(j);
    return r;
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
inline EigResult sym_eig(const Matrix& a, const std::string& name = "matrix") {
    require_square(a, "sym_eig(" + name + ")");
    require_finite(a, "sym_eig(" + name + ")");
    if (!is_symmetric(a)) {
        std::ostringstream msg;
        msg << "sym_eig(" << name << "): input is not symmetric, max |a_ij - a_ji| = " << max_asymmetry(a);
        throw ContractViolation(msg.str());
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success)
        throw FactorizationError("sym_eig(" + name + "): eigen solver did not converge");

    const Eigen::Index n = a.rows();
    EigResult r;
    r.vectors.resize(n, n);
    r.values.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        r.vectors.col(j) = solver.eigenvectors().col(n - 1 - j);
        r.values[static_cast<std::size_t>(j)] = solver.eigenvalues()(n - 1 - j);
    }
    detail::canonicalize_signs(r.vectors);
    return r;
}

/// Polar decomposition built from the SVD: K1 = U S U^T, K2 = V S V^T, L = U V^T.
inline PolarParts polar_decompose(const Matrix& s, const std::string& name = "matrix") {
    require_square(s, "polar_decompose(" + name + ")");
    const SvdResult f = svd(s, name);
    const Vector sigma = f.sigma_vector();
    PolarParts p;
    p.k1 = symmetrized(f.u * sigma.asDiagonal() * f.u.transpose());
    p.k2 = symmetrized(f.v * sigma.asDiagonal() * f.v.transpose());
    p.l = f.u * f.v.transpose();
    return p;
}

/// Floors negative eigenvalues at zero. Eigenvalues below -tol are reported.
inline Matrix psd_clip(const Matrix& a, double tol = kPsdTol, Warnings* warnings = nullptr,
                       const std::string& name = "matrix") {
    const EigResult e = sym_eig(a, name);
    if (e.values.empty() || e.values.back() >= 0.0) return a;

    std::vector<double> reported;
    Vector clipped = e.value_vector();
    for (Eigen::Index j = 0; j < clipped.size(); ++j) {
        if (clipped(j) < -tol) reported.push_back(clipped(j));
        clipped(j) = std::max(clipped(j), 0.0);
    }
    if (!reported.empty()) {
        std::ostringstream msg;
        msg << "psd_clip(" << name << "): clipped " << reported.size() << " eigenvalue(s) below -" << tol << ":";
        for (double v : reported) msg << ' ' << v;
        warn(warnings, msg.str());
    }
    return symmetrized(e.vectors * clipped.asDiagonal() * e.vectors.transpose());
}

/// Applies f to the spectrum of a symmetric matrix.
inline Matrix sym_apply(const EigResult& e, const std::function<double(double)>& f) {
    Vector mapped = e.value_vector();
    for (Eigen::Index j = 0; j < mapped.size(); ++j) mapped(j) = f(mapped(j));
    return symmetrized(e.vectors * mapped.asDiagonal() * e.vectors.transpose());
}

/// Smallest eigenvalue relative to the largest magnitude one; used for singularity checks.
inline bool numerically_singular(const EigResult& e) {
    if (e.values.empty()) return true;
    const double scale = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
    return scale == 0.0 || e.values.back() <= kRankTol * scale;
}

inline double min_eigenvalue(const Matrix& a) {
    const EigResult e = sym_eig(a);
    return e.values.empty() ? 0.0 : e.values.back();
}

}  // namespace alsi
