#pragma once

// Kernel fusion: the two PSD sources of asymmetry of S, the label-derived prior
// kernel W, and the regularized combination K = F(K1, K2) + tau * W.

#include "alsi/core.hpp"
#include "alsi/ingest.hpp"
#include "alsi/linalg.hpp"
#include "alsi/similarity.hpp"

#include <map>
#include <optional>
#include <set>

namespace alsi {

/// Item id -> set of external classes the item belongs to.
using Membership = std::map<std::string, std::set<std::string>>;

struct Combiner {
    enum class Kind { Arithmetic, Geometric, Harmonic };
    Kind kind = Kind::Arithmetic;
    double t = 0.5;  // weight for the geometric / harmonic means, in [0, 1]
};

inline std::string to_string(Combiner::Kind k) {
    switch (k) {
        case Combiner::Kind::Arithmetic: return "arithmetic";
        case Combiner::Kind::Geometric: return "geometric";
        case Combiner::Kind::Harmonic: return "harmonic";
    }
    return "arithmetic";
}

inline Combiner::Kind parse_combiner(const std::string& s) {
    if (s == "arithmetic") return Combiner::Kind::Arithmetic;
    if (s == "geometric") return Combiner::Kind::Geometric;
    if (s == "harmonic") return Combiner::Kind::Harmonic;
    throw ContractViolation("unknown combiner '" + s + "' (expected arithmetic, geometric or harmonic)");
}

struct FusionConfig {
    double tau = 0.2;
    Combiner combiner;
    // Ridge added to K1 and K2 before inverse-based combiners. Unset means
    // 1e-8 * trace / p.
    std::optional<double> ridge;

    /// Both scale parameters are tied to tau + 1, which makes F + tau W the minimizer.
    double gamma() const { return tau + 1.0; }

    void validate() const {
        if (!(tau >= 0.0)) throw ContractViolation("fusion: tau must be >= 0");
        if (!(combiner.t >= 0.0 && combiner.t <= 1.0)) throw ContractViolation("fusion: combiner t must lie in [0, 1]");
        if (ridge && !(*ridge >= 0.0)) throw ContractViolation("fusion: ridge must be >= 0");
    }
};

struct LabelKernel {
    std::vector<std::string> genes;
    std::vector<std::string> classes;  // sorted
    Membership membership;
    Matrix q;  // q(i, j) = |C_i and C_j| / |C_i|
    Matrix w;  // PSD-clipped (Q1 + Q2) / 2
};

struct SourcePair {
    Matrix k1;
    Matrix k2;
};

/// K1 and K2 from the polar decomposition of S, clipped to the PSD cone.
inline SourcePair asymmetry_sources(const Matrix& s, Warnings* warnings = nullptr) {
    PolarParts p = polar_decompose(s, "S");
    return {psd_clip(p.k1, kPsdTol, warnings, "K1"), psd_clip(p.k2, kPsdTol, warnings, "K2")};
}

inline SourcePair asymmetry_sources(const AsymmetricSimilarity& s, Warnings* warnings = nullptr) {
    return asymmetry_sources(s.s, warnings);
}

/// A gene belongs to class k when it is expressed in at least one experiment labelled k.
inline Membership membership_from_incidence(const IncidenceMatrix& x) {
    Membership m;
    for (Eigen::Index j = 0; j < x.x.cols(); ++j) {
        auto& classes = m[x.genes[static_cast<std::size_t>(j)]];
        for (Eigen::Index i = 0; i < x.x.rows(); ++i)
            if (x.x(i, j) != 0.0) classes.insert(x.experiments[static_cast<std::size_t>(i)]);
    }
    return m;
}

inline LabelKernel label_kernel(const Membership& membership, const std::vector<std::string>& genes,
                                Warnings* warnings = nullptr) {
    LabelKernel lk;
    lk.genes = genes;
    const auto p = static_cast<Eigen::Index>(genes.size());
    std::set<std::string> all;
    std::vector<const std::set<std::string>*> sets;
    sets.reserve(genes.size());
    for (const auto& g : genes) {
        auto it = membership.find(g);
        if (it == membership.end() || it->second.empty())
            throw ContractViolation("label_kernel: gene '" + g + "' has no class membership");
        sets.push_back(&it->second);
        all.insert(it->second.begin(), it->second.end());
        lk.membership.emplace(g, it->second);
    }
    lk.classes.assign(all.begin(), all.end());

    // Class indicator matrix: shared-class counts are its Gram matrix.
    std::map<std::string, Eigen::Index> class_index;
    for (std::size_t k = 0; k < lk.classes.size(); ++k) class_index[lk.classes[k]] = static_cast<Eigen::Index>(k);
    Matrix ind = Matrix::Zero(p, static_cast<Eigen::Index>(lk.classes.size()));
    for (Eigen::Index i = 0; i < p; ++i)
        for (const auto& c : *sets[static_cast<std::size_t>(i)]) ind(i, class_index[c]) = 1.0;
    const Matrix shared = ind * ind.transpose();
    const Vector sizes = ind.rowwise().sum();
    lk.q = shared.array().colwise() / sizes.array();

    const PolarParts parts = polar_decompose(lk.q, "Q");
    lk.w = psd_clip(symmetrized(0.5 * (parts.k1 + parts.k2)), kPsdTol, warnings, "W");
    return lk;
}

inline double default_ridge(const Matrix& k1, const Matrix& k2) {
    const double p = static_cast<double>(std::max<Eigen::Index>(1, k1.rows()));
    return 1e-8 * 0.5 * (k1.trace() + k2.trace()) / p;
}

namespace detail {

inline EigResult regularized_eig(const Matrix& k, double ridge, const std::string& name) {
    Matrix a = k;
    a.diagonal().array() += ridge;
    EigResult e = sym_eig(a, name);
    if (numerically_singular(e))
        throw SingularityError("combiner: " + name + " is singular" +
                               (ridge == 0.0 ? std::string(" and ridge = 0; supply a positive ridge")
                                             : std::string(" even after adding ridge ") + std::to_string(ridge)));
    return e;
}

}  // namespace detail

/// K1^{1/2} (K1^{-1/2} K2 K1^{-1/2})^t K1^{1/2}, evaluated on K_i + ridge I.
inline Matrix combiner_geometric(const Matrix& k1, const Matrix& k2, double t, double ridge) {
    require_symmetric(k1, "combiner_geometric(K1)");
    require_symmetric(k2, "combiner_geometric(K2)");
    if (k1.rows() != k2.rows()) throw ContractViolation("combiner_geometric: size mismatch");
    const EigResult a = detail::regularized_eig(k1, ridge, "K1");
    detail::regularized_eig(k2, ridge, "K2");
    Matrix b = k2;
    b.diagonal().array() += ridge;
    const Matrix a_half = sym_apply(a, [](double x) { return std::sqrt(x); });
    const Matrix a_inv_half = sym_apply(a, [](double x) { return 1.0 / std::sqrt(x); });
    const Matrix inner = symmetrized(a_inv_half * b * a_inv_half);
    const Matrix inner_t = sym_apply(sym_eig(inner, "K1^-1/2 K2 K1^-1/2"),
                                     [t](double x) { return std::pow(std::max(x, 0.0), t); });
    return symmetrized(a_half * inner_t * a_half);
}

/// (t K1^{-1} + (1 - t) K2^{-1})^{-1}, evaluated on K_i + ridge I.
inline Matrix combiner_harmonic(const Matrix& k1, const Matrix& k2, double t, double ridge) {
    require_symmetric(k1, "combiner_harmonic(K1)");
    require_symmetric(k2, "combiner_harmonic(K2)");
    if (k1.rows() != k2.rows()) throw ContractViolation("combiner_harmonic: size mismatch");
    const EigResult a = detail::regularized_eig(k1, ridge, "K1");
    const EigResult b = detail::regularized_eig(k2, ridge, "K2");
    const auto inv = [](double x) { return 1.0 / x; };
    const Matrix mix = t * sym_apply(a, inv) + (1.0 - t) * sym_apply(b, inv);
    return sym_apply(sym_eig(symmetrized(mix), "harmonic mixture"), inv);
}

inline Matrix combine(const Matrix& k1, const Matrix& k2, const FusionConfig& cfg) {
    switch (cfg.combiner.kind) {
        case Combiner::Kind::Arithmetic: return 0.5 * (k1 + k2);
        case Combiner::Kind::Geometric:
            return combiner_geometric(k1, k2, cfg.combiner.t, cfg.ridge.value_or(default_ridge(k1, k2)));
        case Combiner::Kind::Harmonic:
            return combiner_harmonic(k1, k2, cfg.combiner.t, cfg.ridge.value_or(default_ridge(k1, k2)));
    }
    return 0.5 * (k1 + k2);
}

/// Closed-form minimizer K = F(K1, K2) + tau W of the regularized fusion objective.
inline Matrix fuse(const Matrix& k1, const Matrix& k2, const Matrix& w, const FusionConfig& cfg,
                   Warnings* warnings = nullptr) {
    cfg.validate();
    require_symmetric(k1, "fuse(K1)");
    require_symmetric(k2, "fuse(K2)");
    require_symmetric(w, "fuse(W)");
    if (k1.rows() != k2.rows() || k1.rows() != w.rows())
        throw ContractViolation("fuse: K1, K2 and W must have the same size (" + std::to_string(k1.rows()) + ", " +
                                std::to_string(k2.rows()) + ", " + std::to_string(w.rows()) + ")");
    const Matrix k = symmetrized(combine(k1, k2, cfg) + cfg.tau * w);
    return psd_clip(k, kPsdTol, warnings, "K");
}

/// G_tau(K) = ||K - gamma F||_F^2 + tau ||K - gamma W||_F^2 with gamma = tau + 1.
inline double fusion_objective(const Matrix& k, const Matrix& f, const Matrix& w, double tau) {
    const double gamma = tau + 1.0;
    return (k - gamma * f).squaredNorm() + tau * (k - gamma * w).squaredNorm();
}

/// Feature map of lambda1 k1 + lambda2 k2: the column concatenation [sqrt(l1) phi1 | sqrt(l2) phi2].
inline Matrix kernel_sum_feature_map(const Matrix& phi1, const Matrix& phi2, double lambda1, double lambda2) {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
        throw ContractViolation("kernel_sum_feature_map: weights must be non-negative");
    if (phi1.rows() != phi2.rows())
        throw ContractViolation("kernel_sum_feature_map: feature maps must have one row per item");
    Matrix phi(phi1.rows(), phi1.cols() + phi2.cols());
    phi.leftCols(phi1.cols()) = std::sqrt(lambda1) * phi1;
    phi.rightCols(phi2.cols()) = std::sqrt(lambda2) * phi2;
    return phi;
}

}  // namespace alsi
