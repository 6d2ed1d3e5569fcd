// alsi: command-line driver for the asymmetric LSI pipeline.
//
//   alsi <command> [--config path] [flags]
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

#include "alsi/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Flag {
    std::string key;
    std::string value;
};

int run(int argc, char** argv) {
    CLI::App app{"asymmetric latent semantic indexing of gene expression data"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);

    // Every RunConfig key is also a flag; values go through the same parser as the config file.
    std::vector<Flag> flags;
    flags.reserve(alsi::config_entries(alsi::RunConfig{}).size());
    for (const auto& [key, value] : alsi::config_entries(alsi::RunConfig{})) {
        std::string name = key;
        std::replace(name.begin(), name.end(), '_', '-');
        flags.push_back({key, ""});
        app.add_option("--" + name, flags.back().value, "default: " + (value.empty() ? std::string("(none)") : value));
    }
    bool print_config = false;
    app.add_flag("--print-config", print_config, "print the effective config and exit");

    alsi::SyntheticSpec gen;
    std::string gen_out;
    std::string gen_truth;
    auto* generate = app.add_subcommand("generate", "write a synthetic expression matrix with planted nested supports");
    generate->add_option("--experiments", gen.n, "number of experiments (rows)")->capture_default_str();
    generate->add_option("--genes", gen.p, "number of genes (columns)")->capture_default_str();
    generate->add_option("--depth", gen.depth, "hierarchy depth")->capture_default_str();
    generate->add_option("--out", gen_out, "expression CSV to write")->required();
    generate->add_option("--truth", gen_truth, "ground-truth CSV to write");

    std::vector<CLI::App*> stages;
    stages.push_back(app.add_subcommand("filter", "CV filter and binarization"));
    stages.push_back(app.add_subcommand("similarity", "asymmetric inclusion similarity"));
    stages.push_back(app.add_subcommand("fuse", "polar sources, label kernel and fused kernel"));
    stages.push_back(app.add_subcommand("embed", "latent embedding of the fused kernel"));
    stages.push_back(app.add_subcommand("cluster", "Gaussian mixture over the embedding"));
    stages.push_back(app.add_subcommand("map", "MDS and Sammon projections"));
    stages.push_back(app.add_subcommand("report", "markdown summary of a finished run"));
    auto* run_all = app.add_subcommand("run-all", "run every stage in order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    alsi::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = alsi::load_config(config_path);
        for (const auto& f : flags)
            if (!f.value.empty()) alsi::set_config_value(cfg, f.key, f.value);
        cfg.validate();
    } catch (const alsi::Error& e) {
        std::cerr << "alsi: " << e.what() << '\n';
        return 1;
    }
    if (print_config) {
        std::cout << alsi::config_to_text(cfg);
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << "alsi: a subcommand is required; see --help\n";
        return 1;
    }

    if (generate->parsed()) {
        gen.seed = cfg.seed;
        const alsi::SyntheticData data = alsi::generate_synthetic(gen);
        alsi::write_expression(gen_out, data.expression);
        if (!gen_truth.empty()) alsi::write_ground_truth(gen_truth, data);
        return 0;
    }

    alsi::Pipeline pipeline(cfg);
    if (run_all->parsed()) {
        pipeline.run_all();
    } else {
        for (auto* s : stages)
            if (s->parsed()) pipeline.run(s->get_name());
    }
    for (const auto& w : pipeline.manifest().value("warnings", std::vector<std::string>{}))
        std::cerr << "warning: " << w << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const alsi::DataError& e) {
        std::cerr << "alsi: data error: " << e.what() << '\n';
        return 2;
    } catch (const alsi::NumericalError& e) {
        std::cerr << "alsi: numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "alsi: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "alsi: " << e.what() << '\n';
        return 2;
    }
}
