#pragma once

// Latent-class coordinates: classic LSI from the incidence matrix and the
// kernelized embedding driven by a fused PSD kernel.

#include "alsi/core.hpp"
#include "alsi/csv.hpp"
#include "alsi/ingest.hpp"
#include "alsi/linalg.hpp"

namespace alsi {

struct LatentEmbedding {
    std::vector<std::string> items;
    Matrix coords;                    // items x m
    std::vector<double> eigenvalues;  // retained spectrum, descending
    bool whitened = false;

    Eigen::Index dims() const { return coords.cols(); }
};

struct LsiEmbedding {
    LatentEmbedding terms;
    LatentEmbedding documents;
};

/// Classic LSI. With X = U S V^T a term t_j maps to S^{-1} U^T t_j, which is row j of V;
/// a document d_i maps to row i of U. Dimensions beyond the numerical rank are not returned.
inline LsiEmbedding lsi_embed(const IncidenceMatrix& x, Eigen::Index m, Warnings* warnings = nullptr) {
    const Eigen::Index n = x.x.rows();
    const Eigen::Index p = x.x.cols();
    if (m < 1 || m > std::min(n, p))
        throw ContractViolation("lsi_embed: m = " + std::to_string(m) + " must lie in [1, min(n, p) = " +
                                std::to_string(std::min(n, p)) + "]");
    const SvdResult f = svd(x.x, "X");
    const double cutoff = kRankTol * (f.sigma.empty() ? 0.0 : f.sigma.front());
    Eigen::Index rank = 0;
    while (rank < static_cast<Eigen::Index>(f.sigma.size()) && f.sigma[static_cast<std::size_t>(rank)] > cutoff) ++rank;
    if (rank == 0) throw ContractViolation("lsi_embed: incidence matrix is all zero");
    const Eigen::Index kept = std::min(m, rank);
    if (kept < m)
        warn(warnings, "lsi_embed: requested " + std::to_string(m) + " dimensions but X has numerical rank " +
                           std::to_string(rank));

    LsiEmbedding out;
    std::vector<double> lambda;
    for (Eigen::Index j = 0; j < kept; ++j) lambda.push_back(f.sigma[static_cast<std::size_t>(j)] * f.sigma[static_cast<std::size_t>(j)]);
    out.terms = {x.genes, f.v.leftCols(kept), lambda, true};
    out.documents = {x.experiments, f.u.leftCols(kept), lambda, true};
    return out;
}

/// Kernelized LSI: K = U L U^T; keeps the smallest m whose eigenvalues carry `energy` of the
/// positive spectrum. Coordinates are U L^{1/2} (distance preserving) or U when whitened.
inline LatentEmbedding alsi_embed(const Matrix& k, double energy = 0.95, bool whitened = false,
                                  std::vector<std::string> items = {}) {
    if (!(energy > 0.0 && energy <= 1.0)) throw ContractViolation("alsi_embed: energy must lie in (0, 1]");
    const EigResult e = sym_eig(k, "K");
    const double top = e.values.empty() ? 0.0 : e.values.front();
    const double scale = std::max(1.0, std::abs(top));
    if (!e.values.empty() && e.values.back() < -kPsdTol * scale)
        throw ContractViolation("alsi_embed: kernel is not positive semi-definite (smallest eigenvalue " +
                                std::to_string(e.values.back()) + "); pass it through psd_clip first");
    if (top <= 0.0) throw ContractViolation("alsi_embed: kernel has no positive eigenvalue");

    Eigen::Index positive = 0;
    double total = 0.0;
    while (positive < static_cast<Eigen::Index>(e.values.size()) &&
           e.values[static_cast<std::size_t>(positive)] >= kRankTol * top) {
        total += e.values[static_cast<std::size_t>(positive)];
        ++positive;
    }
    Eigen::Index m = 0;
    double acc = 0.0;
    while (m < positive) {
        acc += e.values[static_cast<std::size_t>(m)];
        ++m;
        if (acc >= energy * total) break;
    }

    LatentEmbedding out;
    if (items.empty())
        for (Eigen::Index i = 0; i < k.rows(); ++i) items.push_back(std::to_string(i + 1));
    out.items = std::move(items);
    out.whitened = whitened;
    out.eigenvalues.assign(e.values.begin(), e.values.begin() + m);
    out.coords = e.vectors.leftCols(m);
    if (!whitened)
        for (Eigen::Index j = 0; j < m; ++j) out.coords.col(j) *= std::sqrt(e.values[static_cast<std::size_t>(j)]);
    return out;
}

/// d_jk = sqrt(K_jj + K_kk - 2 K_jk).
inline Matrix induced_distance(const Matrix& k) {
    require_symmetric(k, "induced_distance");
    const Eigen::Index p = k.rows();
    const double scale = std::max(1.0, k.diagonal().cwiseAbs().maxCoeff());
    Matrix d = Matrix::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index l = j + 1; l < p; ++l) {
            const double sq = k(j, j) + k(l, l) - 2.0 * k(j, l);
            if (sq < -kPsdTol * scale)
                throw ContractViolation("induced_distance: negative squared distance " + std::to_string(sq) +
                                        "; kernel is not PSD");
            d(j, l) = d(l, j) = std::sqrt(std::max(0.0, sq));
        }
    return d;
}

inline void write_embedding(const std::string& path, const LatentEmbedding& e) {
    CsvTable t;
    t.header.push_back("id");
    for (Eigen::Index j = 0; j < e.coords.cols(); ++j) t.header.push_back("dim" + std::to_string(j + 1));
    t.row_labels = e.items;
    t.values = e.coords;
    write_csv_file(path, t);
}

inline LatentEmbedding load_embedding(const std::string& path) {
    CsvTable t = read_csv_file(path, {.header = true, .row_labels = true});
    LatentEmbedding e;
    e.items = std::move(t.row_labels);
    e.coords = std::move(t.values);
    return e;
}

}  // namespace alsi
