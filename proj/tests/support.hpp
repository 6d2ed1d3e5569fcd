#pragma once

// Random instance generators shared by the unit tests and the acceptance binary.

#include "alsi/core.hpp"
#include "alsi/ingest.hpp"
#include "alsi/rng.hpp"

#include <Eigen/Cholesky>

#include <filesystem>

namespace alsi::testing {

inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = rng.uniform(lo, hi);
    return a;
}

inline Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = rng.normal();
    return a;
}

inline Matrix symmetric_matrix(Eigen::Index n, Rng& rng) {
    Matrix a = normal_matrix(n, n, rng);
    return 0.5 * (a + a.transpose());
}

/// B B^T with B n x r; rank r when r < n.
inline Matrix psd_matrix(Eigen::Index n, Rng& rng, Eigen::Index r = -1) {
    Matrix b = normal_matrix(n, r < 0 ? n : r, rng);
    Matrix k = b * b.transpose();
    return 0.5 * (k + k.transpose());
}

/// Random 0/1 matrix with no empty column.
inline IncidenceMatrix random_incidence(Eigen::Index n, Eigen::Index p, Rng& rng, double density = 0.4) {
    IncidenceMatrix x;
    x.x = Matrix::Zero(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) x.x(i, j) = rng.uniform() < density ? 1.0 : 0.0;
        if (x.x.col(j).sum() == 0.0) x.x(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))), j) = 1.0;
        x.genes.push_back("g" + std::to_string(j + 1));
    }
    for (Eigen::Index i = 0; i < n; ++i) x.experiments.push_back("E" + std::to_string(i % 3 + 1));
    return x;
}

/// Evaluates ||K - g F||^2 + tau ||K - g W||^2 entry by entry, g = tau + 1.
inline double objective_by_loops(const Matrix& k, const Matrix& f, const Matrix& w, double tau) {
    const double g = tau + 1.0;
    double a = 0.0;
    double b = 0.0;
    for (Eigen::Index i = 0; i < k.rows(); ++i)
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
            a += (k(i, j) - g * f(i, j)) * (k(i, j) - g * f(i, j));
            b += (k(i, j) - g * w(i, j)) * (k(i, j) - g * w(i, j));
        }
    return a + tau * b;
}

struct QuadraticOracle {
    Matrix minimizer;    // from Newton's step on the finite-difference model
    Matrix gradient_at;  // finite-difference gradient at the probe point
};

/// Treats G as a black-box quadratic in the n*n entries: gradient and Hessian come from
/// central differences with unit steps (exact for quadratics up to rounding), and the
/// minimizer from one Newton step taken at `probe`. For an exact quadratic the step lands on
/// the same point from anywhere; starting near the optimum keeps rounding small.
template <typename Objective>
QuadraticOracle quadratic_oracle(Objective g, Eigen::Index n, const Matrix& probe) {
    const Eigen::Index m = n * n;
    const auto unit = [n](Eigen::Index a) {
        Matrix e = Matrix::Zero(n, n);
        e(a % n, a / n) = 1.0;
        return e;
    };
    const auto gradient = [&](const Matrix& at) {
        Matrix grad(n, n);
        for (Eigen::Index a = 0; a < m; ++a) grad(a % n, a / n) = 0.5 * (g(at + unit(a)) - g(at - unit(a)));
        return grad;
    };
    Matrix h(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = a; b < m; ++b) {
            const Matrix ea = unit(a);
            const Matrix eb = unit(b);
            h(a, b) = h(b, a) = 0.25 * (g(probe + ea + eb) - g(probe + ea - eb) - g(probe + eb - ea) + g(probe - ea - eb));
        }
    QuadraticOracle out;
    out.gradient_at = gradient(probe);
    const Vector step = h.ldlt().solve(-out.gradient_at.reshaped());
    out.minimizer = probe + step.reshaped(n, n);
    return out;
}

inline std::string temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("alsi_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace alsi::testing
