#pragma once

// Desk-scale expression data with planted hierarchy: genes at deeper levels are
// expressed in subsets of their parent's experiments, which produces the heavy
// right tail in the gene-norm distribution and strongly asymmetric similarities.

#include "alsi/core.hpp"
#include "alsi/ingest.hpp"
#include "alsi/rng.hpp"

#include <fstream>
#include <numeric>

namespace alsi {

struct SyntheticSpec {
    Eigen::Index n = 20;  // experiments
    Eigen::Index p = 30;  // genes
    int depth = 3;        // hierarchy levels; 1 means no nesting
    std::uint64_t seed = 0;
};

struct PlantedGene {
    std::string id;
    bool noise = false;  // background gene, never differentially expressed
    int level = -1;
    int parent = -1;                    // index of the parent gene, -1 at the root level
    std::vector<Eigen::Index> support;  // experiments where the gene is expressed
};

struct SyntheticData {
    ExpressionMatrix expression;
    std::vector<PlantedGene> truth;
};

/// Levels l = 0..depth-1 have support size max(1, floor(n / 2^(l+1))); level l holds
/// roughly 2^l / (2^depth - 1) of the planted genes. About a fifth of the genes are noise.
inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 2 || spec.p < 2) throw ContractViolation("generate_synthetic: n and p must be >= 2");
    if (spec.depth < 1) throw ContractViolation("generate_synthetic: depth must be >= 1");
    const Eigen::Index n = spec.n;
    const Eigen::Index p = spec.p;
    Rng rng(derive_seed(spec.seed, "synthetic"));

    const Eigen::Index classes = std::clamp<Eigen::Index>(n / 2, 1, 4);
    SyntheticData out;
    auto& y = out.expression;
    for (Eigen::Index i = 0; i < n; ++i) y.experiments.push_back("T" + std::to_string(i * classes / n + 1));

    const Eigen::Index noise = std::max<Eigen::Index>(1, p / 5);
    const Eigen::Index planted = p - noise;
    std::vector<Eigen::Index> per_level(static_cast<std::size_t>(spec.depth), 0);
    const double total_weight = std::ldexp(1.0, spec.depth) - 1.0;
    Eigen::Index assigned = 0;
    for (int l = 0; l < spec.depth; ++l) {
        auto c = static_cast<Eigen::Index>(std::floor(static_cast<double>(planted) * std::ldexp(1.0, l) / total_weight));
        if (planted >= spec.depth) c = std::max<Eigen::Index>(c, 1);
        per_level[static_cast<std::size_t>(l)] = c;
        assigned += c;
    }
    // Rounding leftovers go to the deepest level; overshoot is taken from it.
    per_level.back() += planted - assigned;
    for (int l = spec.depth - 1; l > 0 && per_level[static_cast<std::size_t>(l)] < 0; --l) {
        per_level[static_cast<std::size_t>(l - 1)] += per_level[static_cast<std::size_t>(l)];
        per_level[static_cast<std::size_t>(l)] = 0;
    }

    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    const auto sample = [&](const std::vector<Eigen::Index>& from, Eigen::Index k) {
        std::vector<Eigen::Index> pool = from;
        std::shuffle(pool.begin(), pool.end(), rng.engine());
        pool.resize(static_cast<std::size_t>(std::min<Eigen::Index>(k, static_cast<Eigen::Index>(pool.size()))));
        std::sort(pool.begin(), pool.end());
        return pool;
    };

    std::vector<int> previous_level;
    for (int l = 0; l < spec.depth; ++l) {
        const Eigen::Index size = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(std::ldexp(static_cast<double>(n), -(l + 1)))));
        std::vector<int> this_level;
        for (Eigen::Index g = 0; g < per_level[static_cast<std::size_t>(l)]; ++g) {
            PlantedGene pg;
            pg.level = l;
            if (previous_level.empty()) {
                pg.support = sample(all, size);
            } else {
                pg.parent = previous_level[rng.below(previous_level.size())];
                pg.support = sample(out.truth[static_cast<std::size_t>(pg.parent)].support, size);
            }
            this_level.push_back(static_cast<int>(out.truth.size()));
            out.truth.push_back(std::move(pg));
        }
        if (!this_level.empty()) previous_level = std::move(this_level);
    }
    for (Eigen::Index g = 0; g < noise; ++g) {
        PlantedGene pg;
        pg.noise = true;
        out.truth.push_back(std::move(pg));
    }

    y.values.resize(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        auto& pg = out.truth[static_cast<std::size_t>(j)];
        pg.id = "g" + std::to_string(j + 1);
        y.genes.push_back(pg.id);
        std::vector<bool> on(static_cast<std::size_t>(n), false);
        for (auto e : pg.support) on[static_cast<std::size_t>(e)] = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double v = 0.0;
            if (pg.noise) v = std::clamp(2.0 + 0.3 * rng.normal(), 1.0, 3.0);
            else if (on[static_cast<std::size_t>(i)]) v = std::max(6.0, 8.0 + 0.5 * rng.normal());
            else v = std::clamp(1.5 + 0.3 * rng.normal(), 0.5, 2.5);
            y.values(i, j) = v;
        }
    }
    return out;
}

inline void write_ground_truth(const std::string& path, const SyntheticData& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "gene,kind,level,parent,support\n";
    for (const auto& g : data.truth) {
        out << g.id << ',' << (g.noise ? "noise" : "planted") << ',' << g.level << ','
            << (g.parent >= 0 ? data.truth[static_cast<std::size_t>(g.parent)].id : std::string("-")) << ',';
        for (std::size_t k = 0; k < g.support.size(); ++k) out << (k ? ";" : "") << g.support[k] + 1;
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace alsi
