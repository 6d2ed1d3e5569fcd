#include "alsi/pipeline.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <fstream>

using namespace alsi;
namespace fs = std::filesystem;

namespace {

const std::string kFixture = std::string(ALSI_SOURCE_DIR) + "/data/synthetic_20x8.csv";

RunConfig fixture_config(const std::string& out) {
    RunConfig c;
    c.input = kFixture;
    c.output = out;
    c.seed = 7;
    return c;
}

std::map<std::string, std::string> digests(const nlohmann::json& manifest) {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : manifest.at("files").items()) out[k] = v.get<std::string>();
    return out;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(ALSI_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli_output(const std::string& args) {
    const std::string tmp = alsi::testing::temp_dir("cli_output") + "/out.txt";
    const std::string cmd = std::string(ALSI_CLI) + " " + args + " >" + tmp + " 2>&1";
    if (std::system(cmd.c_str()) == -1) return {};
    std::ifstream in(tmp);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

IncidenceMatrix binarized(const ExpressionMatrix& y) { return binarize(y, cv_filter(y, 0.5)); }

}  // namespace

TEST(Config, RoundTripIsLossless) {
    RunConfig c;
    c.input = "in.csv";
    c.output = "out dir";
    c.seed = 18446744073709551615ull;
    c.cv_threshold = 0.1 + 0.2;
    c.cv_convention = CvConvention::MeanOverSd;
    c.binarize_threshold = 1.0 / 3.0;
    c.tau = 0.7;
    c.combiner = Combiner::Kind::Harmonic;
    c.combiner_t = 0.25;
    c.ridge = 1e-9;
    c.energy = 0.875;
    c.whitened = true;
    c.q = 9;
    c.gmm_restarts = 2;
    c.gmm_max_iter = 33;
    c.gmm_rel_tol = 3e-11;
    c.gmm_ridge = 2e-5;
    c.covariance = CovarianceType::Full;
    c.top_k = 7;
    c.dims = 2;
    c.sammon_dims = 3;
    c.sammon_max_iter = 10;
    c.profile_metric = ProfileMetric::ChiSquare;
    c.bins = 12;
    const std::string text = config_to_text(c);
    const RunConfig back = config_from_text(text);
    EXPECT_EQ(config_entries(back), config_entries(c));
    EXPECT_EQ(back.cv_threshold, c.cv_threshold);
    EXPECT_EQ(*back.binarize_threshold, *c.binarize_threshold);
    EXPECT_EQ(config_to_text(back), text);
}

TEST(Config, CommentsDefaultsAndErrors) {
    const RunConfig c = config_from_text("# comment\n\ntau = 0   # inline\nq = auto\n");
    EXPECT_EQ(c.tau, 0.0);
    EXPECT_FALSE(c.q.has_value());
    EXPECT_EQ(c.energy, 0.95);
    EXPECT_THROW(config_from_text("nope = 1\n"), ContractViolation);
    EXPECT_THROW(config_from_text("tau = abc\n"), ContractViolation);
    EXPECT_THROW(config_from_text("tau\n"), ContractViolation);
    RunConfig bad;
    bad.energy = 1.5;
    EXPECT_THROW(bad.validate(), ContractViolation);
}

TEST(Synthetic, DeepHierarchySkewsNorms) {
    SyntheticSpec spec;
    spec.depth = 3;
    spec.p = 30;
    spec.seed = 1;
    const IncidenceMatrix x = binarized(generate_synthetic(spec).expression);
    std::vector<double> norms;
    for (Eigen::Index j = 0; j < x.x.cols(); ++j) norms.push_back(x.x.col(j).sum());
    std::vector<double> sorted = norms;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    EXPECT_GE(sorted.back(), 4.0 * median);
}

TEST(Synthetic, SupportsRecoveredAndNested) {
    SyntheticSpec spec;
    spec.seed = 2;
    const SyntheticData d = generate_synthetic(spec);
    const IncidenceMatrix x = binarized(d.expression);
    std::size_t planted = 0;
    for (const auto& g : d.truth) {
        if (g.noise) {
            EXPECT_EQ(std::count(x.genes.begin(), x.genes.end(), g.id), 0);
            continue;
        }
        ++planted;
        const auto j = std::find(x.genes.begin(), x.genes.end(), g.id) - x.genes.begin();
        ASSERT_LT(static_cast<std::size_t>(j), x.genes.size());
        std::vector<Eigen::Index> support;
        for (Eigen::Index i = 0; i < x.x.rows(); ++i)
            if (x.x(i, j) == 1.0) support.push_back(i);
        EXPECT_EQ(support, g.support);
        if (g.parent >= 0) {
            const auto& parent = d.truth[static_cast<std::size_t>(g.parent)].support;
            EXPECT_TRUE(std::includes(parent.begin(), parent.end(), g.support.begin(), g.support.end()));
        }
    }
    EXPECT_EQ(planted, x.genes.size());
}

TEST(Synthetic, FlatHierarchyHasNoSkew) {
    SyntheticSpec spec;
    spec.depth = 1;
    spec.seed = 3;
    const IncidenceMatrix x = binarized(generate_synthetic(spec).expression);
    const NormDiagnostics d = norm_diagnostics(x, asymmetric_similarity(x), 10);
    EXPECT_LT(d.skew_max, 1e-12);
}

TEST(Synthetic, SeedDeterminesFiles) {
    const std::string dir = alsi::testing::temp_dir("synthetic");
    SyntheticSpec spec;
    spec.seed = 4;
    write_expression(dir + "/a.csv", generate_synthetic(spec).expression);
    write_expression(dir + "/b.csv", generate_synthetic(spec).expression);
    EXPECT_EQ(sha256_file(dir + "/a.csv"), sha256_file(dir + "/b.csv"));
    spec.seed = 5;
    write_expression(dir + "/c.csv", generate_synthetic(spec).expression);
    EXPECT_NE(sha256_file(dir + "/a.csv"), sha256_file(dir + "/c.csv"));
    EXPECT_THROW(generate_synthetic({.n = 1, .p = 5, .depth = 1, .seed = 0}), ContractViolation);
}

TEST(Pipeline, RunAllListsEveryArtifactWithDigest) {
    const std::string dir = alsi::testing::temp_dir("run_all");
    Pipeline p(fixture_config(dir));
    p.run_all();
    const nlohmann::json m = p.manifest();
    const auto files = digests(m);
    std::size_t expected = 0;
    for (const auto& [stage, names] : stage_artifacts()) {
        expected += names.size();
        for (const auto& f : names) {
            ASSERT_TRUE(files.count(f)) << f;
            EXPECT_EQ(files.at(f), sha256_file(dir + "/" + f)) << f;
        }
        EXPECT_TRUE(m["stages"].contains(stage));
        EXPECT_GE(m["stages"][stage]["seconds"].get<double>(), 0.0);
    }
    EXPECT_EQ(files.size(), expected);
    EXPECT_EQ(m["version"], kToolVersion);
    EXPECT_EQ(m["config"]["seed"], "7");
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().filename() != "manifest.json") {
            EXPECT_TRUE(files.count(entry.path().filename().string()));
        }
    }
}

TEST(Pipeline, DeterministicDigests) {
    const std::string a = alsi::testing::temp_dir("det_a");
    const std::string b = alsi::testing::temp_dir("det_b");
    Pipeline pa(fixture_config(a));
    pa.run_all();
    Pipeline pb(fixture_config(b));
    pb.run_all();
    EXPECT_EQ(digests(pa.manifest()), digests(pb.manifest()));
}

TEST(Pipeline, StagesAreIndividuallyRerunnable) {
    const std::string dir = alsi::testing::temp_dir("rerun");
    Pipeline p(fixture_config(dir));
    p.run_all();
    const auto before = digests(p.manifest());
    for (const auto& f : {"embedding.csv", "model.json", "responsibilities.csv", "cross_table.csv",
                          "top_members.csv", "sammon.csv", "sammon.svg", "report.md"})
        fs::remove(dir + "/" + f);
    for (const auto& s : {"embed", "cluster", "map", "report"}) p.run(s);
    EXPECT_EQ(digests(p.manifest()), before);
}

TEST(Pipeline, RerunningUpstreamInvalidatesDownstream) {
    const std::string dir = alsi::testing::temp_dir("invalidate");
    Pipeline p(fixture_config(dir));
    p.run_all();
    p.run("fuse");
    const nlohmann::json m = p.manifest();
    EXPECT_FALSE(m["stages"].contains("embed"));
    EXPECT_FALSE(fs::exists(dir + "/embedding.csv"));
    EXPECT_TRUE(fs::exists(dir + "/similarity.csv"));
}

TEST(Pipeline, TauZeroGivesCombinerOutput) {
    const std::string dir = alsi::testing::temp_dir("tau0");
    RunConfig c = fixture_config(dir);
    c.tau = 0.0;
    Pipeline p(c);
    for (const auto& s : {"filter", "similarity", "fuse"}) p.run(s);
    const nlohmann::json m = p.manifest();
    EXPECT_EQ(m["fusion"]["tau"].get<double>(), 0.0);
    EXPECT_EQ(m["config"]["tau"], "0");
    const Matrix s = read_csv_file(dir + "/similarity.csv", {.header = true, .row_labels = true}).values;
    const Matrix k = read_csv_file(dir + "/fused_kernel.csv", {.header = true, .row_labels = true}).values;
    const SourcePair src = asymmetry_sources(s);
    EXPECT_LT((k - psd_clip(0.5 * (src.k1 + src.k2))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pipeline, MissingUpstreamNamesCommand) {
    const std::string dir = alsi::testing::temp_dir("missing");
    Pipeline p(fixture_config(dir));
    try {
        p.run("fuse");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("alsi similarity"), std::string::npos) << e.what();
    }
    EXPECT_THROW(p.run("nope"), ContractViolation);
}

TEST(Pipeline, QCappedAtItemCount) {
    const std::string dir = alsi::testing::temp_dir("qcap");
    RunConfig c = fixture_config(dir);
    c.q = 1000;
    Pipeline p(c);
    p.run_all();
    const auto warnings = p.manifest()["warnings"].get<std::vector<std::string>>();
    EXPECT_TRUE(std::any_of(warnings.begin(), warnings.end(),
                            [](const std::string& w) { return w.find("exceeds the item count") != std::string::npos; }));
}

TEST(Cli, ExitCodes) {
    const std::string dir = alsi::testing::temp_dir("cli");
    EXPECT_EQ(cli(""), 1);
    EXPECT_EQ(cli("bogus"), 1);
    EXPECT_EQ(cli("filter --tau abc --input " + kFixture + " --output " + dir), 1);
    EXPECT_EQ(cli("filter --input /nonexistent.csv --output " + dir), 2);
    EXPECT_EQ(cli("fuse --output " + dir), 2);
    EXPECT_EQ(cli("run-all --input " + kFixture + " --output " + dir + " --seed 7"), 0);
    EXPECT_TRUE(fs::exists(dir + "/report.md"));
    // A singular kernel for the harmonic mean with ridge 0 is a numerical failure.
    EXPECT_EQ(cli("fuse --combiner harmonic --ridge 0 --input " + kFixture + " --output " + dir), 3);
}

TEST(Cli, ConfigFileAndFlagsCombine) {
    const std::string dir = alsi::testing::temp_dir("cli_config");
    std::ofstream(dir + "/run.cfg") << "input = " << kFixture << "\noutput = " << dir << "/out\ntau = 0.5\n";
    const std::string printed = cli_output("run-all --config " + dir + "/run.cfg --tau 0.25 --print-config");
    EXPECT_NE(printed.find("tau = 0.25"), std::string::npos) << printed;
    EXPECT_NE(printed.find("input = " + kFixture), std::string::npos) << printed;
    EXPECT_NE(cli_output("--print-config --tau 0.3").find("tau = 0.29999999999999999"), std::string::npos);
    EXPECT_EQ(cli("run-all --config " + dir + "/run.cfg"), 0);
    EXPECT_TRUE(fs::exists(dir + "/out/manifest.json"));
}

TEST(Cli, GenerateMatchesBundledFixture) {
    const std::string dir = alsi::testing::temp_dir("cli_generate");
    ASSERT_EQ(cli("generate --experiments 8 --genes 20 --depth 3 --seed 7 --out " + dir + "/g.csv"), 0);
    EXPECT_EQ(sha256_file(dir + "/g.csv"), sha256_file(kFixture));
}
