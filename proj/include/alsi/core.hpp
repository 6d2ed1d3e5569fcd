#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace alsi {

/// Dense 64-bit matrix used for every quantity in the pipeline.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy. The CLI maps DataError -> exit 2, NumericalError -> exit 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (parse errors, violated preconditions on data).
struct DataError : Error {
    using Error::Error;
};

struct ParseError : DataError {
    using DataError::DataError;
};

struct ContractViolation : DataError {
    using DataError::DataError;
};

struct IoError : DataError {
    using DataError::DataError;
};

/// A factorization or solve could not be completed.
struct NumericalError : Error {
    using Error::Error;
};

struct FactorizationError : NumericalError {
    using NumericalError::NumericalError;
};

struct SingularityError : NumericalError {
    using NumericalError::NumericalError;
};

/// Collects non-fatal diagnostics. Operations that can warn take an optional pointer.
struct Warnings {
    std::vector<std::string> items;

    void add(std::string msg) { items.push_back(std::move(msg)); }
    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
};

inline void warn(Warnings* sink, std::string msg) {
    if (sink) sink->add(std::move(msg));
}

/// Symmetry tolerance used for every "symmetric within 1e-10" contract, scaled by the
/// largest entry so kernels with large magnitudes are not rejected for round-off.
inline constexpr double kSymmetryTol = 1e-10;
/// Eigenvalues above -kPsdTol (relative to the spectral scale) count as non-negative.
inline constexpr double kPsdTol = 1e-10;
/// Singular/eigen values below kRankTol * max are treated as zero.
inline constexpr double kRankTol = 1e-12;

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline void require_finite(const Matrix& a, const std::string& name) {
    if (!a.allFinite()) throw ContractViolation(name + ": matrix contains NaN or Inf");
}

/// Builds a matrix from row-major entries, validating shape and finiteness.
inline Matrix from_row_major(std::size_t rows, std::size_t cols, const std::vector<double>& entries) {
    if (entries.size() != rows * cols)
        throw ContractViolation("matrix entries length " + std::to_string(entries.size()) +
                                " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = entries[i * cols + j];
    require_finite(m, "matrix");
    return m;
}

inline double max_asymmetry(const Matrix& a) {
    if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = i + 1; j < a.cols(); ++j)
            worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
    return worst;
}

inline bool is_symmetric(const Matrix& a, double tol = kSymmetryTol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return max_asymmetry(a) <= tol * scale;
}

inline void require_square(const Matrix& a, const std::string& name) {
    if (a.rows() != a.cols())
        throw ContractViolation(name + ": expected a square matrix, got " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()));
}

inline void require_symmetric(const Matrix& a, const std::string& name) {
    require_square(a, name);
    if (!is_symmetric(a)) {
        throw ContractViolation(name + ": matrix is not symmetric (max |a_ij - a_ji| = " +
                                std::to_string(max_asymmetry(a)) + ")");
    }
}

inline Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline double relative_frobenius_error(const Matrix& approx, const Matrix& exact) {
    const double denom = std::max(exact.norm(), std::numeric_limits<double>::min());
    return (approx - exact).norm() / denom;
}

/// Equal-width histogram. A degenerate range puts every value into the first bin.
struct Histogram {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<std::size_t> counts;
};

inline Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
    if (bins < 1) throw ContractViolation("histogram: bins must be >= 1");
    Histogram h;
    h.lo.resize(bins);
    h.hi.resize(bins);
    h.counts.assign(bins, 0);
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -std::numeric_limits<double>::infinity();
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (!std::isfinite(vmin)) {
        vmin = 0.0;
        vmax = 1.0;
    }
    const double width = vmax > vmin ? (vmax - vmin) / static_cast<double>(bins) : 1.0;
    for (std::size_t b = 0; b < bins; ++b) {
        h.lo[b] = vmin + width * static_cast<double>(b);
        h.hi[b] = b + 1 == bins && vmax > vmin ? vmax : vmin + width * static_cast<double>(b + 1);
    }
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        auto b = static_cast<std::size_t>(std::floor((v - vmin) / width));
        h.counts[std::min(b, bins - 1)] += 1;
    }
    return h;
}

}  // namespace alsi
