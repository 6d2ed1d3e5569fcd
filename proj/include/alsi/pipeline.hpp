#pragma once

// File-based orchestration of the full workflow:
//   filter -> similarity -> fuse -> embed -> cluster -> map -> report
// Every stage reads its upstream CSV/JSON artifacts from the output directory,
// writes its own, and records digests, timings and warnings in manifest.json.

#include "alsi/core.hpp"
#include "alsi/csv.hpp"
#include "alsi/fusion.hpp"
#include "alsi/ingest.hpp"
#include "alsi/latent.hpp"
#include "alsi/linalg.hpp"
#include "alsi/mixture.hpp"
#include "alsi/similarity.hpp"
#include "alsi/synthetic.hpp"
#include "alsi/viz.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "json.hpp"

namespace alsi {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunConfig {
    std::string input;
    std::string output = "alsi_out";
    std::uint64_t seed = 0;

    double cv_threshold = 0.5;
    CvConvention cv_convention = CvConvention::SdOverMean;
    std::optional<double> binarize_threshold;
    std::size_t bins = 30;

    double tau = 0.2;
    Combiner::Kind combiner = Combiner::Kind::Arithmetic;
    double combiner_t = 0.5;
    std::optional<double> ridge;

    double energy = 0.95;
    bool whitened = false;

    std::optional<Eigen::Index> q;  // unset: number of external classes
    int gmm_restarts = 10;
    int gmm_max_iter = 500;
    double gmm_rel_tol = 1e-8;
    double gmm_ridge = 1e-6;
    CovarianceType covariance = CovarianceType::Diagonal;
    std::size_t top_k = 5;

    Eigen::Index dims = 3;
    Eigen::Index sammon_dims = 2;
    int sammon_max_iter = 1000;
    ProfileMetric profile_metric = ProfileMetric::Euclidean;

    FusionConfig fusion() const {
        FusionConfig f;
        f.tau = tau;
        f.combiner = {combiner, combiner_t};
        f.ridge = ridge;
        return f;
    }

    GmmConfig gmm() const {
        GmmConfig g;
        g.restarts = gmm_restarts;
        g.max_iter = gmm_max_iter;
        g.rel_tol = gmm_rel_tol;
        g.ridge = gmm_ridge;
        g.seed = derive_seed(seed, "cluster");
        g.covariance = covariance;
        return g;
    }

    void validate() const {
        fusion().validate();
        if (!(energy > 0.0 && energy <= 1.0)) throw ContractViolation("config: energy must lie in (0, 1]");
        if (q && *q < 1) throw ContractViolation("config: q must be >= 1");
        if (gmm_restarts < 1 || gmm_max_iter < 1) throw ContractViolation("config: gmm_restarts and gmm_max_iter must be >= 1");
        if (!(gmm_rel_tol > 0.0) || !(gmm_ridge > 0.0)) throw ContractViolation("config: gmm_rel_tol and gmm_ridge must be > 0");
        if (dims < 1 || sammon_dims < 1) throw ContractViolation("config: dims must be >= 1");
        if (bins < 1 || top_k < 1) throw ContractViolation("config: bins and top_k must be >= 1");
        if (sammon_max_iter < 0) throw ContractViolation("config: sammon_max_iter must be >= 0");
    }
};

inline std::string to_string(ProfileMetric m) { return m == ProfileMetric::Euclidean ? "euclidean" : "chi-square"; }

inline ProfileMetric parse_profile_metric(const std::string& s) {
    if (s == "euclidean") return ProfileMetric::Euclidean;
    if (s == "chi-square") return ProfileMetric::ChiSquare;
    throw ContractViolation("unknown profile metric '" + s + "' (expected euclidean or chi-square)");
}

namespace detail {

inline std::string opt_to_string(const std::optional<double>& v) { return v ? format_double(*v) : "auto"; }

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* b = value.data();
    const char* e = value.data() + value.size();
    std::from_chars_result r{};
    if constexpr (std::is_floating_point_v<T>) r = std::from_chars(b, e, out);
    else r = std::from_chars(b, e, out);
    if (value.empty() || r.ec != std::errc() || r.ptr != e)
        throw ContractViolation("config: key '" + key + "' has invalid value '" + value + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ContractViolation("config: key '" + key + "' expects true/false, got '" + value + "'");
}

}  // namespace detail

/// Flat key/value view of a config; the config file and manifest both use it.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
    return {
        {"input", c.input},
        {"output", c.output},
        {"seed", std::to_string(c.seed)},
        {"cv_threshold", format_double(c.cv_threshold)},
        {"cv_convention", to_string(c.cv_convention)},
        {"binarize_threshold", detail::opt_to_string(c.binarize_threshold)},
        {"bins", std::to_string(c.bins)},
        {"tau", format_double(c.tau)},
        {"combiner", to_string(c.combiner)},
        {"combiner_t", format_double(c.combiner_t)},
        {"ridge", detail::opt_to_string(c.ridge)},
        {"energy", format_double(c.energy)},
        {"whitened", c.whitened ? "true" : "false"},
        {"q", c.q ? std::to_string(*c.q) : "auto"},
        {"gmm_restarts", std::to_string(c.gmm_restarts)},
        {"gmm_max_iter", std::to_string(c.gmm_max_iter)},
        {"gmm_rel_tol", format_double(c.gmm_rel_tol)},
        {"gmm_ridge", format_double(c.gmm_ridge)},
        {"covariance", to_string(c.covariance)},
        {"top_k", std::to_string(c.top_k)},
        {"dims", std::to_string(c.dims)},
        {"sammon_dims", std::to_string(c.sammon_dims)},
        {"sammon_max_iter", std::to_string(c.sammon_max_iter)},
        {"profile_metric", to_string(c.profile_metric)},
    };
}

/// Applies one `key = value` setting.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_number;
    const auto opt_double = [&](std::optional<double>& dst) {
        if (value == "auto" || value == "none") dst.reset();
        else dst = parse_number<double>(key, value);
    };
    if (key == "input") c.input = value;
    else if (key == "output") c.output = value;
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "cv_threshold") c.cv_threshold = parse_number<double>(key, value);
    else if (key == "cv_convention") c.cv_convention = parse_cv_convention(value);
    else if (key == "binarize_threshold") opt_double(c.binarize_threshold);
    else if (key == "bins") c.bins = parse_number<std::size_t>(key, value);
    else if (key == "tau") c.tau = parse_number<double>(key, value);
    else if (key == "combiner") c.combiner = parse_combiner(value);
    else if (key == "combiner_t") c.combiner_t = parse_number<double>(key, value);
    else if (key == "ridge") opt_double(c.ridge);
    else if (key == "energy") c.energy = parse_number<double>(key, value);
    else if (key == "whitened") c.whitened = detail::parse_bool(key, value);
    else if (key == "q") {
        if (value == "auto") c.q.reset();
        else c.q = parse_number<Eigen::Index>(key, value);
    }
    else if (key == "gmm_restarts") c.gmm_restarts = parse_number<int>(key, value);
    else if (key == "gmm_max_iter") c.gmm_max_iter = parse_number<int>(key, value);
    else if (key == "gmm_rel_tol") c.gmm_rel_tol = parse_number<double>(key, value);
    else if (key == "gmm_ridge") c.gmm_ridge = parse_number<double>(key, value);
    else if (key == "covariance") c.covariance = parse_covariance(value);
    else if (key == "top_k") c.top_k = parse_number<std::size_t>(key, value);
    else if (key == "dims") c.dims = parse_number<Eigen::Index>(key, value);
    else if (key == "sammon_dims") c.sammon_dims = parse_number<Eigen::Index>(key, value);
    else if (key == "sammon_max_iter") c.sammon_max_iter = parse_number<int>(key, value);
    else if (key == "profile_metric") c.profile_metric = parse_profile_metric(value);
    else throw ContractViolation("config: unknown key '" + key + "'");
}

inline std::string config_to_text(const RunConfig& c) {
    std::ostringstream out;
    for (const auto& [k, v] : config_entries(c)) out << k << " = " << v << '\n';
    return out.str();
}

inline RunConfig config_from_text(const std::string& text, RunConfig base = {}) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto body = detail::trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw ContractViolation("config line " + std::to_string(line_no) + ": expected 'key = value'");
        set_config_value(base, std::string(detail::trim(body.substr(0, eq))), std::string(detail::trim(body.substr(eq + 1))));
    }
    return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_text(buf.str(), std::move(base));
}

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path + " for digest");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

/// Names of the files each stage emits, relative to the output directory.
inline const std::map<std::string, std::vector<std::string>>& stage_artifacts() {
    static const std::map<std::string, std::vector<std::string>> m = {
        {"filter", {"filter_report.csv", "cv_histogram.csv", "incidence.csv"}},
        {"similarity", {"similarity.csv", "norm_histogram.csv"}},
        {"fuse", {"label_q.csv", "label_w.csv", "fused_kernel.csv"}},
        {"embed", {"embedding.csv"}},
        {"cluster", {"model.json", "responsibilities.csv", "cross_table.csv", "top_members.csv"}},
        {"map", {"mds_alsi.csv", "mds_alsi.svg", "mds_pearson.csv", "mds_euclidean.csv", "sammon.csv", "sammon.svg"}},
        {"report", {"report.md"}},
    };
    return m;
}

inline const std::vector<std::string>& stage_order() {
    static const std::vector<std::string> order = {"filter", "similarity", "fuse", "embed", "cluster", "map", "report"};
    return order;
}

struct StageOutcome {
    std::vector<std::string> warnings;
    nlohmann::json info = nlohmann::json::object();
};

class Pipeline {
public:
    explicit Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        std::filesystem::create_directories(cfg_.output);
    }

    const RunConfig& config() const { return cfg_; }
    std::string path(const std::string& name) const { return (std::filesystem::path(cfg_.output) / name).string(); }

    void run(const std::string& stage) {
        static const std::map<std::string, StageOutcome (Pipeline::*)()> table = {
            {"filter", &Pipeline::filter},   {"similarity", &Pipeline::similarity}, {"fuse", &Pipeline::fuse},
            {"embed", &Pipeline::embed},     {"cluster", &Pipeline::cluster},       {"map", &Pipeline::map},
            {"report", &Pipeline::report},
        };
        auto it = table.find(stage);
        if (it == table.end()) throw ContractViolation("unknown stage '" + stage + "'");
        const auto t0 = std::chrono::steady_clock::now();
        StageOutcome outcome = (this->*(it->second))();
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        record(stage, outcome, secs);
    }

    void run_all() {
        for (const auto& s : stage_order()) run(s);
    }

    nlohmann::json manifest() const { return read_manifest(); }

private:
    RunConfig cfg_;

    void require(const std::string& name, const std::string& producer) const {
        if (!std::filesystem::exists(path(name)))
            throw DataError("missing artifact " + path(name) + "; run `alsi " + producer + "` first");
    }

    nlohmann::json read_manifest() const {
        std::ifstream in(path("manifest.json"));
        if (!in) return nlohmann::json::object();
        try {
            return nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path("manifest.json") + ": " + e.what());
        }
    }

    void record(const std::string& stage, const StageOutcome& outcome, double seconds) {
        nlohmann::json m = read_manifest();
        m["tool"] = "alsi";
        m["version"] = kToolVersion;
        nlohmann::json cfg = nlohmann::json::object();
        for (const auto& [k, v] : config_entries(cfg_)) cfg[k] = v;
        m["config"] = cfg;
        m["fusion"] = {{"tau", cfg_.tau},
                       {"combiner", to_string(cfg_.combiner)},
                       {"combiner_t", cfg_.combiner_t},
                       {"ridge", cfg_.ridge ? nlohmann::json(*cfg_.ridge) : nlohmann::json("auto")},
                       {"gamma1", cfg_.tau + 1.0},
                       {"gamma2", cfg_.tau + 1.0}};
        auto& st = m["stages"][stage];
        st["seconds"] = seconds;
        st["warnings"] = outcome.warnings;
        st["info"] = outcome.info;
        for (const auto& f : stage_artifacts().at(stage)) m["files"][f] = sha256_file(path(f));
        // Downstream artifacts from an older run are stale once a stage is re-run.
        bool downstream = false;
        for (const auto& s : stage_order()) {
            if (downstream && m.contains("stages") && m["stages"].contains(s)) {
                m["stages"].erase(s);
                for (const auto& f : stage_artifacts().at(s)) {
                    if (m["files"].contains(f)) m["files"].erase(f);
                    std::filesystem::remove(path(f));
                }
            }
            if (s == stage) downstream = true;
        }
        std::vector<std::string> all;
        for (const auto& s : stage_order())
            if (m["stages"].contains(s))
                for (const auto& w : m["stages"][s]["warnings"]) all.push_back(s + ": " + w.get<std::string>());
        m["warnings"] = all;
        std::ofstream out(path("manifest.json"), std::ios::binary);
        if (!out) throw IoError("cannot write " + path("manifest.json"));
        out << m.dump(2) << '\n';
    }

    IncidenceMatrix incidence() const {
        require("incidence.csv", "filter");
        return load_incidence(path("incidence.csv"));
    }

    Matrix labeled_square(const std::string& name, const std::string& producer, std::vector<std::string>* ids) const {
        require(name, producer);
        CsvTable t = read_csv_file(path(name), {.header = true, .row_labels = true});
        if (t.values.rows() != t.values.cols())
            throw ParseError(path(name) + ": expected a square matrix");
        if (ids) *ids = std::move(t.row_labels);
        return std::move(t.values);
    }

    StageOutcome filter() {
        if (cfg_.input.empty()) throw ContractViolation("filter: no input file configured (--input)");
        Warnings w;
        const ExpressionMatrix y = load_expression(cfg_.input);
        const FilterReport rep = cv_filter(y, cfg_.cv_threshold, cfg_.cv_convention, cfg_.bins);
        const IncidenceMatrix x = binarize(y, rep, cfg_.binarize_threshold, &w);

        std::ofstream fr(path("filter_report.csv"), std::ios::binary);
        if (!fr) throw IoError("cannot write " + path("filter_report.csv"));
        fr << "gene,mean,sd,cv,kept\n";
        for (std::size_t j = 0; j < y.genes.size(); ++j)
            fr << y.genes[j] << ',' << format_double(rep.mean[j]) << ',' << format_double(rep.sd[j]) << ','
               << (std::isinf(rep.cv[j]) ? std::string("inf") : format_double(rep.cv[j])) << ','
               << (rep.kept[j] ? 1 : 0) << '\n';
        fr.close();
        write_histogram(path("cv_histogram.csv"), rep.cv_histogram);
        write_incidence(path("incidence.csv"), x);

        StageOutcome o;
        o.warnings = w.items;
        o.info = {{"experiments", y.experiments.size()},
                  {"genes", y.genes.size()},
                  {"kept", rep.kept_count()},
                  {"binarized_genes", x.genes.size()},
                  {"dropped", x.dropped},
                  {"expression_threshold", x.expression_threshold},
                  {"cv_convention", to_string(rep.convention)}};
        return o;
    }

    StageOutcome similarity() {
        const IncidenceMatrix x = incidence();
        const AsymmetricSimilarity s = asymmetric_similarity(x);
        const NormDiagnostics d = norm_diagnostics(x, s, cfg_.bins);
        write_labeled_square(path("similarity.csv"), s.genes, s.s);
        write_histogram(path("norm_histogram.csv"), d.histogram);
        StageOutcome o;
        o.info = {{"genes", s.genes.size()}, {"skew_max", d.skew_max}, {"skew_mean", d.skew_mean}};
        return o;
    }

    StageOutcome fuse() {
        Warnings w;
        std::vector<std::string> genes;
        const Matrix s = labeled_square("similarity.csv", "similarity", &genes);
        const IncidenceMatrix x = incidence();
        if (x.genes != genes) throw DataError("fuse: similarity.csv and incidence.csv list different genes; re-run `alsi similarity`");
        const SourcePair src = asymmetry_sources(s, &w);
        const LabelKernel lk = label_kernel(membership_from_incidence(x), genes, &w);
        const Matrix k = alsi::fuse(src.k1, src.k2, lk.w, cfg_.fusion(), &w);
        write_labeled_square(path("label_q.csv"), genes, lk.q);
        write_labeled_square(path("label_w.csv"), genes, lk.w);
        write_labeled_square(path("fused_kernel.csv"), genes, k);
        StageOutcome o;
        o.warnings = w.items;
        o.info = {{"frobenius_s", s.norm()},
                  {"frobenius_k1", src.k1.norm()},
                  {"frobenius_k2", src.k2.norm()},
                  {"classes", lk.classes}};
        return o;
    }

    StageOutcome embed() {
        std::vector<std::string> genes;
        const Matrix k = labeled_square("fused_kernel.csv", "fuse", &genes);
        const LatentEmbedding e = alsi_embed(k, cfg_.energy, cfg_.whitened, genes);
        write_embedding(path("embedding.csv"), e);
        StageOutcome o;
        o.info = {{"m", e.dims()}, {"energy", cfg_.energy}, {"whitened", cfg_.whitened}, {"eigenvalues", e.eigenvalues}};
        return o;
    }

    StageOutcome cluster() {
        require("embedding.csv", "embed");
        const LatentEmbedding e = load_embedding(path("embedding.csv"));
        const IncidenceMatrix x = incidence();
        const Membership mem = membership_from_incidence(x);
        std::set<std::string> classes;
        for (const auto& item : e.items) {
            auto it = mem.find(item);
            if (it == mem.end()) throw DataError("cluster: embedding item '" + item + "' is not in incidence.csv");
            classes.insert(it->second.begin(), it->second.end());
        }
        Eigen::Index q = cfg_.q.value_or(static_cast<Eigen::Index>(classes.size()));
        StageOutcome o;
        if (q > e.coords.rows()) {
            o.warnings.push_back("cluster: q = " + std::to_string(q) + " exceeds the item count; using " +
                                 std::to_string(e.coords.rows()));
            q = e.coords.rows();
        }
        const MixtureModel model = fit_gmm(e.coords, q, cfg_.gmm());
        const Responsibilities r = responsibilities(model, e.coords, e.items);
        const CrossTable ct = cross_table(r, mem);
        const auto top = top_members(r, cfg_.top_k);

        {
            std::ofstream out(path("model.json"), std::ios::binary);
            if (!out) throw IoError("cannot write " + path("model.json"));
            out << to_json(model).dump(2) << '\n';
        }
        CsvTable rt;
        rt.header.push_back("id");
        for (Eigen::Index k = 0; k < r.matrix.cols(); ++k) rt.header.push_back("C" + std::to_string(k + 1));
        rt.header.push_back("hard");
        rt.row_labels = r.items;
        rt.values.resize(r.matrix.rows(), r.matrix.cols() + 1);
        rt.values.leftCols(r.matrix.cols()) = r.matrix;
        for (Eigen::Index i = 0; i < r.matrix.rows(); ++i)
            rt.values(i, r.matrix.cols()) = static_cast<double>(r.hard[static_cast<std::size_t>(i)] + 1);
        write_csv_file(path("responsibilities.csv"), rt);
        write_cross_table(path("cross_table.csv"), ct);

        std::ofstream tm(path("top_members.csv"), std::ios::binary);
        if (!tm) throw IoError("cannot write " + path("top_members.csv"));
        tm << "cluster";
        for (std::size_t k = 0; k < cfg_.top_k; ++k) tm << ",gene" << k + 1;
        tm << '\n';
        for (std::size_t c = 0; c < top.size(); ++c) {
            tm << 'C' << c + 1;
            for (auto idx : top[c]) tm << ',' << r.items[static_cast<std::size_t>(idx)];
            tm << '\n';
        }

        o.warnings.insert(o.warnings.end(), model.warnings.begin(), model.warnings.end());
        o.info = {{"q", q}, {"loglik", model.loglik}, {"iterations", model.iterations}, {"restart", model.restart}};
        return o;
    }

    StageOutcome map() {
        Warnings w;
        std::vector<std::string> genes;
        const Matrix k = labeled_square("fused_kernel.csv", "fuse", &genes);
        const IncidenceMatrix x = incidence();
        const Membership mem = membership_from_incidence(x);
        std::vector<std::string> keys;
        for (const auto& g : genes) keys.push_back(*mem.at(g).begin());

        Projection alsi_map = classical_mds(induced_distance(k), cfg_.dims, &w);
        alsi_map.items = genes;
        alsi_map.color_key = keys;
        emit_csv(alsi_map, path("mds_alsi.csv"));
        emit_scatter(alsi_map, path("mds_alsi.svg"), "aLSI kernel distances, classical MDS");

        // Baselines on the expression profiles of the same genes.
        if (cfg_.input.empty()) throw ContractViolation("map: baselines need the expression input (--input)");
        const ExpressionMatrix y = load_expression(cfg_.input);
        std::map<std::string, Eigen::Index> col;
        for (std::size_t j = 0; j < y.genes.size(); ++j) col[y.genes[j]] = static_cast<Eigen::Index>(j);
        Matrix prof(y.values.rows(), static_cast<Eigen::Index>(genes.size()));
        for (std::size_t j = 0; j < genes.size(); ++j) {
            auto it = col.find(genes[j]);
            if (it == col.end()) throw DataError("map: gene '" + genes[j] + "' is not in the expression input");
            prof.col(static_cast<Eigen::Index>(j)) = y.values.col(it->second);
        }
        for (auto [kind, name] : {std::pair{BaselineKind::Pearson, "mds_pearson.csv"},
                                  std::pair{BaselineKind::Euclidean, "mds_euclidean.csv"}}) {
            Projection pr = classical_mds(baseline_distances(prof, kind, &w), cfg_.dims, &w);
            pr.items = genes;
            pr.color_key = keys;
            emit_csv(pr, path(name));
        }

        // Class map from the cross-table row profiles; classes with identical profiles are merged.
        require("cross_table.csv", "cluster");
        const CrossTable ct = load_cross_table(path("cross_table.csv"));
        Matrix d = profile_distances(ct, cfg_.profile_metric);
        std::vector<std::string> labels = ct.rows;
        std::vector<Eigen::Index> keep;
        for (Eigen::Index a = 0; a < d.rows(); ++a) {
            bool merged = false;
            for (auto b : keep)
                if (d(a, b) == 0.0) {
                    labels[static_cast<std::size_t>(b)] += "+" + ct.rows[static_cast<std::size_t>(a)];
                    w.add("map: classes " + ct.rows[static_cast<std::size_t>(b)] + " and " +
                          ct.rows[static_cast<std::size_t>(a)] + " have identical cluster profiles; merged");
                    merged = true;
                    break;
                }
            if (!merged) keep.push_back(a);
        }
        Projection sm;
        if (keep.size() >= 2) {
            Matrix dk(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
            for (std::size_t a = 0; a < keep.size(); ++a)
                for (std::size_t b = 0; b < keep.size(); ++b)
                    dk(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = d(keep[a], keep[b]);
            SammonConfig sc;
            sc.max_iter = cfg_.sammon_max_iter;
            sc.seed = derive_seed(cfg_.seed, "map");
            sm = sammon(dk, std::min<Eigen::Index>(cfg_.sammon_dims, static_cast<Eigen::Index>(keep.size())), sc, &w);
        } else {
            w.add("map: fewer than two distinct class profiles; Sammon map is a single point");
            sm.coords = Matrix::Zero(1, cfg_.sammon_dims);
        }
        sm.items.clear();
        for (auto a : keep) sm.items.push_back(labels[static_cast<std::size_t>(a)]);
        sm.color_key = sm.items;
        emit_csv(sm, path("sammon.csv"));
        emit_scatter(sm, path("sammon.svg"), "Sammon map of class profiles");

        StageOutcome o;
        o.warnings = w.items;
        o.info = {{"mds_explained", alsi_map.explained}, {"sammon_stress", sm.stress}};
        return o;
    }

    StageOutcome report() {
        require("cross_table.csv", "cluster");
        require("top_members.csv", "cluster");
        require("sammon.csv", "map");
        const CrossTable ct = load_cross_table(path("cross_table.csv"));
        std::ostringstream md;
        md << "# aLSI run report\n\n";
        const nlohmann::json m = read_manifest();
        if (m.contains("stages") && m["stages"].contains("filter")) {
            const auto& f = m["stages"]["filter"]["info"];
            md << "- experiments: " << f.value("experiments", 0) << "\n- genes: " << f.value("genes", 0)
               << "\n- genes kept by the CV filter: " << f.value("kept", 0)
               << "\n- expression threshold: " << format_double(f.value("expression_threshold", 0.0)) << "\n";
        }
        if (m.contains("stages") && m["stages"].contains("embed"))
            md << "- latent dimensions: " << m["stages"]["embed"]["info"].value("m", 0) << "\n";
        md << "- tau: " << format_double(cfg_.tau) << ", combiner: " << to_string(cfg_.combiner) << "\n\n";

        md << "## Top members per latent class\n\n| Latent class |";
        std::ifstream tm(path("top_members.csv"));
        std::string line;
        std::getline(tm, line);
        auto head = detail::split_fields(line);
        for (std::size_t k = 1; k < head.size(); ++k) md << " Gene " << k << " |";
        md << "\n|---|";
        for (std::size_t k = 1; k < head.size(); ++k) md << "---|";
        md << '\n';
        while (std::getline(tm, line)) {
            auto f = detail::split_fields(line);
            if (f.empty()) continue;
            md << "| " << f[0].substr(1) << " |";
            for (std::size_t k = 1; k < f.size(); ++k) md << ' ' << f[k] << " |";
            md << '\n';
        }

        md << "\n## Classes by latent cluster\n\n| |";
        for (const auto& c : ct.cols) md << ' ' << c << " |";
        md << "\n|---|";
        for (std::size_t c = 0; c < ct.cols.size(); ++c) md << "---:|";
        md << '\n';
        for (std::size_t r = 0; r < ct.rows.size(); ++r) {
            md << "| " << ct.rows[r] << " |";
            for (Eigen::Index c = 0; c < ct.counts.cols(); ++c) md << ' ' << ct.counts(static_cast<Eigen::Index>(r), c) << " |";
            md << '\n';
        }
        std::ofstream out(path("report.md"), std::ios::binary);
        if (!out) throw IoError("cannot write " + path("report.md"));
        out << md.str();
        return {};
    }

public:
    static void write_histogram(const std::string& file, const Histogram& h) {
        std::ofstream out(file, std::ios::binary);
        if (!out) throw IoError("cannot write " + file);
        out << "bin_lo,bin_hi,count\n";
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            out << format_double(h.lo[b]) << ',' << format_double(h.hi[b]) << ',' << h.counts[b] << '\n';
    }

    static void write_cross_table(const std::string& file, const CrossTable& ct) {
        CsvTable t;
        t.header.push_back("class");
        t.header.insert(t.header.end(), ct.cols.begin(), ct.cols.end());
        t.row_labels = ct.rows;
        t.values = ct.counts.cast<double>();
        write_csv_file(file, t);
    }

    static CrossTable load_cross_table(const std::string& file) {
        CsvTable t = read_csv_file(file, {.header = true, .row_labels = true});
        CrossTable ct;
        ct.rows = std::move(t.row_labels);
        ct.cols.assign(t.header.begin() + 1, t.header.end());
        ct.counts = t.values.cast<int>();
        return ct;
    }
};

}  // namespace alsi
