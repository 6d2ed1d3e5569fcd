#pragma once

// Gaussian mixture clustering of the latent coordinates (EM with k-means++
// initialization), soft memberships, and the class-by-cluster cross table.

#include "alsi/core.hpp"
#include "alsi/fusion.hpp"
#include "alsi/latent.hpp"
#include "alsi/rng.hpp"

#include <Eigen/Cholesky>
#include <numeric>
#include <set>

#include "json.hpp"

namespace alsi {

enum class CovarianceType { Diagonal, Full };

inline std::string to_string(CovarianceType c) { return c == CovarianceType::Diagonal ? "diagonal" : "full"; }

inline CovarianceType parse_covariance(const std::string& s) {
    if (s == "diagonal") return CovarianceType::Diagonal;
    if (s == "full") return CovarianceType::Full;
    throw ContractViolation("unknown covariance type '" + s + "' (expected diagonal or full)");
}

struct GmmConfig {
    int restarts = 10;
    int max_iter = 500;
    double rel_tol = 1e-8;
    double ridge = 1e-6;  // covariance floor = ridge * mean per-dimension data variance
    std::uint64_t seed = 0;
    CovarianceType covariance = CovarianceType::Diagonal;
};

struct MixtureModel {
    Eigen::Index q = 0;
    std::vector<double> weights;
    Matrix means;                     // q x d
    std::vector<Matrix> covariances;  // q matrices, d x d (diagonal when CovarianceType::Diagonal)
    CovarianceType covariance = CovarianceType::Diagonal;
    double floor = 0.0;
    double loglik = -std::numeric_limits<double>::infinity();
    std::vector<double> trace;  // log-likelihood per iteration since the last re-seed
    std::uint64_t seed = 0;
    int iterations = 0;
    int restart = 0;
    std::vector<std::string> warnings;

    Eigen::Index dim() const { return means.cols(); }
};

struct Responsibilities {
    std::vector<std::string> items;
    Matrix matrix;                   // items x components
    std::vector<Eigen::Index> hard;  // argmax, lowest index on ties
};

struct CrossTable {
    std::vector<std::string> rows;  // external classes, sorted
    std::vector<std::string> cols;  // C1..Cq
    Eigen::MatrixXi counts;
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454836;

struct ComponentCache {
    Eigen::LLT<Matrix> chol;
    Vector inv_diag;
    double log_det = 0.0;
};

inline ComponentCache prepare(const MixtureModel& m, Eigen::Index k) {
    ComponentCache c;
    const Matrix& cov = m.covariances[static_cast<std::size_t>(k)];
    if (m.covariance == CovarianceType::Diagonal) {
        c.inv_diag = cov.diagonal().cwiseInverse();
        c.log_det = cov.diagonal().array().log().sum();
    } else {
        c.chol.compute(cov);
        if (c.chol.info() != Eigen::Success) throw FactorizationError("gmm: covariance is not positive definite");
        c.log_det = 2.0 * c.chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }
    return c;
}

inline double log_density(const MixtureModel& m, const ComponentCache& c, Eigen::Index k,
                          const Eigen::Ref<const Vector>& x) {
    const Vector diff = x - m.means.row(k).transpose();
    double maha = 0.0;
    if (m.covariance == CovarianceType::Diagonal) maha = diff.cwiseAbs2().dot(c.inv_diag);
    else maha = c.chol.matrixL().solve(diff).squaredNorm();
    return -0.5 * (static_cast<double>(diff.size()) * kLog2Pi + c.log_det + maha);
}

// log(alpha_k) + log N_k(x_i) for every item and component.
inline Matrix joint_log(const MixtureModel& m, const Matrix& x) {
    Matrix out(x.rows(), m.q);
    for (Eigen::Index k = 0; k < m.q; ++k) {
        const ComponentCache c = prepare(m, k);
        const double lw = std::log(m.weights[static_cast<std::size_t>(k)]);
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, k) = lw + log_density(m, c, k, x.row(i).transpose());
    }
    return out;
}

inline Vector row_logsumexp(const Matrix& a) {
    Vector out(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double mx = a.row(i).maxCoeff();
        if (!std::isfinite(mx)) {
            out(i) = mx;
            continue;
        }
        out(i) = mx + std::log((a.row(i).array() - mx).exp().sum());
    }
    return out;
}

inline Matrix floored_covariance(Matrix cov, CovarianceType type, double floor) {
    if (type == CovarianceType::Diagonal) {
        Matrix d = Matrix::Zero(cov.rows(), cov.cols());
        for (Eigen::Index j = 0; j < cov.rows(); ++j) d(j, j) = std::max(cov(j, j), floor);
        return d;
    }
    // Clipping the eigenvalues at the floor is the constrained maximum-likelihood covariance,
    // so EM stays monotone.
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(cov));
    Vector ev = es.eigenvalues().cwiseMax(floor);
    return symmetrized(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

inline std::vector<Eigen::Index> kmeanspp(const Matrix& x, Eigen::Index q, Rng& rng) {
    const Eigen::Index n = x.rows();
    std::vector<Eigen::Index> centers;
    centers.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    Vector d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
    while (static_cast<Eigen::Index>(centers.size()) < q) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total <= 0.0) {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        } else {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc > target && d2(i) > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(pick);
        d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
    }
    return centers;
}

inline MixtureModel run_em(const Matrix& x, Eigen::Index q, const GmmConfig& cfg, int restart) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const Vector mean = x.colwise().mean().transpose();
    const Vector var = (x.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() / static_cast<double>(n);
    const double avg_var = d > 0 ? var.mean() : 0.0;

    MixtureModel m;
    m.q = q;
    m.covariance = cfg.covariance;
    m.floor = cfg.ridge * (avg_var > 0.0 ? avg_var : 1.0);
    m.seed = cfg.seed;
    m.restart = restart;

    Matrix global = Matrix::Zero(d, d);
    if (cfg.covariance == CovarianceType::Diagonal) global.diagonal() = var;
    else global = (x.rowwise() - mean.transpose()).transpose() * (x.rowwise() - mean.transpose()) / static_cast<double>(n);
    global = floored_covariance(global, cfg.covariance, m.floor);

    Rng rng(derive_seed(cfg.seed, "gmm-restart-" + std::to_string(restart)));
    const auto centers = kmeanspp(x, q, rng);
    m.means.resize(q, d);
    for (Eigen::Index k = 0; k < q; ++k) m.means.row(k) = x.row(centers[static_cast<std::size_t>(k)]);
    m.weights.assign(static_cast<std::size_t>(q), 1.0 / static_cast<double>(q));
    m.covariances.assign(static_cast<std::size_t>(q), global);

    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_iter; ++it) {
        const Matrix jl = joint_log(m, x);
        const Vector lse = row_logsumexp(jl);
        const double ll = lse.sum();
        m.loglik = ll;
        m.trace.push_back(ll);
        m.iterations = it + 1;
        if (std::isfinite(prev) && ll - prev < cfg.rel_tol * std::abs(prev)) break;
        if (it + 1 == cfg.max_iter) break;  // keep loglik consistent with the stored parameters
        prev = ll;

        const Matrix resp = (jl.colwise() - lse).array().exp().matrix();
        bool reseeded = false;
        for (Eigen::Index k = 0; k < q; ++k) {
            const double nk = resp.col(k).sum();
            if (nk < 1e-10) {
                Eigen::Index worst = 0;
                lse.minCoeff(&worst);
                m.means.row(k) = x.row(worst);
                m.covariances[static_cast<std::size_t>(k)] = global;
                m.weights[static_cast<std::size_t>(k)] = 1.0 / static_cast<double>(n);
                m.warnings.push_back("gmm: component " + std::to_string(k) + " emptied at iteration " +
                                     std::to_string(it + 1) + "; re-seeded from item " + std::to_string(worst));
                reseeded = true;
                continue;
            }
            m.weights[static_cast<std::size_t>(k)] = nk / static_cast<double>(n);
            const Vector mu = (resp.col(k).transpose() * x).transpose() / nk;
            m.means.row(k) = mu.transpose();
            const Matrix centered = x.rowwise() - mu.transpose();
            Matrix cov;
            if (cfg.covariance == CovarianceType::Diagonal) {
                cov = Matrix::Zero(d, d);
                cov.diagonal() = (centered.array().square().colwise() * resp.col(k).array()).colwise().sum().transpose() / nk;
            } else {
                cov = centered.transpose() * resp.col(k).asDiagonal() * centered / nk;
            }
            m.covariances[static_cast<std::size_t>(k)] = floored_covariance(cov, cfg.covariance, m.floor);
        }
        if (reseeded) {
            double total = 0.0;
            for (double w : m.weights) total += w;
            for (double& w : m.weights) w /= total;
            // A re-seed is not an EM step; the monotone trace restarts here.
            m.trace.clear();
            prev = -std::numeric_limits<double>::infinity();
        }
    }
    return m;
}

}  // namespace detail

/// EM over `restarts` k-means++ initializations; keeps the highest log-likelihood
/// (lowest restart index on ties).
inline MixtureModel fit_gmm(const Matrix& coords, Eigen::Index q, const GmmConfig& cfg = {}) {
    if (q < 1) throw ContractViolation("fit_gmm: q must be >= 1");
    if (q > coords.rows())
        throw ContractViolation("fit_gmm: q = " + std::to_string(q) + " exceeds the item count " +
                                std::to_string(coords.rows()));
    if (coords.cols() < 1) throw ContractViolation("fit_gmm: coordinates have no dimensions");
    require_finite(coords, "fit_gmm");
    if (cfg.restarts < 1 || cfg.max_iter < 1) throw ContractViolation("fit_gmm: restarts and max_iter must be >= 1");

    MixtureModel best;
    for (int r = 0; r < cfg.restarts; ++r) {
        MixtureModel m = detail::run_em(coords, q, cfg, r);
        if (r == 0 || m.loglik > best.loglik) best = std::move(m);
    }
    return best;
}

inline MixtureModel fit_gmm(const LatentEmbedding& e, Eigen::Index q, const GmmConfig& cfg = {}) {
    return fit_gmm(e.coords, q, cfg);
}

inline Responsibilities responsibilities(const MixtureModel& model, const Matrix& coords,
                                         std::vector<std::string> items = {}) {
    if (coords.cols() != model.dim())
        throw ContractViolation("responsibilities: coordinates have " + std::to_string(coords.cols()) +
                                " dimensions, model has " + std::to_string(model.dim()));
    const Matrix jl = detail::joint_log(model, coords);
    const Vector lse = detail::row_logsumexp(jl);
    Responsibilities r;
    if (items.empty())
        for (Eigen::Index i = 0; i < coords.rows(); ++i) items.push_back(std::to_string(i + 1));
    r.items = std::move(items);
    r.matrix = (jl.colwise() - lse).array().exp().matrix();
    r.hard.resize(static_cast<std::size_t>(coords.rows()));
    for (Eigen::Index i = 0; i < r.matrix.rows(); ++i) {
        r.matrix.row(i) /= r.matrix.row(i).sum();
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < r.matrix.cols(); ++k)
            if (r.matrix(i, k) > r.matrix(i, best)) best = k;
        r.hard[static_cast<std::size_t>(i)] = best;
    }
    return r;
}

inline Responsibilities responsibilities(const MixtureModel& model, const LatentEmbedding& e) {
    return responsibilities(model, e.coords, e.items);
}

inline CrossTable cross_table(const Responsibilities& resp, const Membership& membership) {
    std::set<std::string> classes;
    for (const auto& item : resp.items) {
        auto it = membership.find(item);
        if (it == membership.end()) throw ContractViolation("cross_table: unknown item id '" + item + "'");
        if (it->second.empty()) throw ContractViolation("cross_table: item '" + item + "' has no external class");
        classes.insert(it->second.begin(), it->second.end());
    }
    CrossTable ct;
    ct.rows.assign(classes.begin(), classes.end());
    for (Eigen::Index k = 0; k < resp.matrix.cols(); ++k) ct.cols.push_back("C" + std::to_string(k + 1));
    ct.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(ct.rows.size()), resp.matrix.cols());
    std::map<std::string, Eigen::Index> row_of;
    for (std::size_t r = 0; r < ct.rows.size(); ++r) row_of[ct.rows[r]] = static_cast<Eigen::Index>(r);
    for (std::size_t i = 0; i < resp.items.size(); ++i)
        for (const auto& c : membership.at(resp.items[i])) ct.counts(row_of[c], resp.hard[i]) += 1;
    return ct;
}

/// Per component, the k items with the highest responsibility (descending, lower index on ties).
inline std::vector<std::vector<Eigen::Index>> top_members(const Responsibilities& resp, std::size_t k) {
    if (k < 1) throw ContractViolation("top_members: k must be >= 1");
    std::vector<std::vector<Eigen::Index>> out;
    const Eigen::Index n = resp.matrix.rows();
    for (Eigen::Index c = 0; c < resp.matrix.cols(); ++c) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        std::stable_sort(idx.begin(), idx.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return resp.matrix(a, c) > resp.matrix(b, c); });
        idx.resize(std::min<std::size_t>(k, idx.size()));
        out.push_back(std::move(idx));
    }
    return out;
}

inline nlohmann::json to_json(const MixtureModel& m) {
    nlohmann::json j;
    j["q"] = m.q;
    j["dim"] = m.dim();
    j["covariance"] = to_string(m.covariance);
    j["weights"] = m.weights;
    std::vector<std::vector<double>> means;
    std::vector<std::vector<double>> covs;
    for (Eigen::Index k = 0; k < m.q; ++k) {
        means.emplace_back(m.means.row(k).begin(), m.means.row(k).end());
        const Matrix& c = m.covariances[static_cast<std::size_t>(k)];
        if (m.covariance == CovarianceType::Diagonal) {
            covs.emplace_back(c.diagonal().begin(), c.diagonal().end());
        } else {
            std::vector<double> flat;
            for (Eigen::Index a = 0; a < c.rows(); ++a)
                for (Eigen::Index b = 0; b < c.cols(); ++b) flat.push_back(c(a, b));
            covs.push_back(std::move(flat));
        }
    }
    j["means"] = means;
    j[m.covariance == CovarianceType::Diagonal ? "covariance_diagonals" : "covariances_row_major"] = covs;
    j["covariance_floor"] = m.floor;
    j["loglik"] = m.loglik;
    j["loglik_trace"] = m.trace;
    j["seed"] = m.seed;
    j["iterations"] = m.iterations;
    j["restart"] = m.restart;
    j["warnings"] = m.warnings;
    return j;
}

inline MixtureModel mixture_from_json(const nlohmann::json& j) {
    MixtureModel m;
    m.q = j.at("q").get<Eigen::Index>();
    const auto d = j.at("dim").get<Eigen::Index>();
    m.covariance = parse_covariance(j.at("covariance").get<std::string>());
    m.weights = j.at("weights").get<std::vector<double>>();
    const auto means = j.at("means").get<std::vector<std::vector<double>>>();
    m.means.resize(m.q, d);
    for (Eigen::Index k = 0; k < m.q; ++k)
        for (Eigen::Index a = 0; a < d; ++a) m.means(k, a) = means.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(a));
    const bool diag = m.covariance == CovarianceType::Diagonal;
    const auto covs = j.at(diag ? "covariance_diagonals" : "covariances_row_major").get<std::vector<std::vector<double>>>();
    for (Eigen::Index k = 0; k < m.q; ++k) {
        Matrix c = Matrix::Zero(d, d);
        const auto& v = covs.at(static_cast<std::size_t>(k));
        for (Eigen::Index a = 0; a < d; ++a) {
            if (diag) c(a, a) = v.at(static_cast<std::size_t>(a));
            else
                for (Eigen::Index b = 0; b < d; ++b) c(a, b) = v.at(static_cast<std::size_t>(a * d + b));
        }
        m.covariances.push_back(std::move(c));
    }
    m.floor = j.value("covariance_floor", 0.0);
    m.loglik = j.at("loglik").get<double>();
    m.trace = j.value("loglik_trace", std::vector<double>{});
    m.seed = j.value("seed", std::uint64_t{0});
    m.iterations = j.value("iterations", 0);
    m.restart = j.value("restart", 0);
    return m;
}

}  // namespace alsi
