// difflab command-line front end.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "difflab/config.hpp"
#include "difflab/errors.hpp"
#include "difflab/report.hpp"
#include "difflab/sim.hpp"

namespace fs = std::filesystem;
using namespace difflab;

namespace {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kParse = 2,
    kValidation = 3,
    kNumerical = 4,
    kInstability = 5,
    kAllDiverged = 6,
};

struct Common {
    std::string config;
    std::string out = ".";
    std::optional<std::size_t> runs;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    bool per_node = false;
    std::string algorithm;
    std::string param;
    std::vector<double> values;
};

ExperimentConfig load(const Common& c) {
    std::vector<Override> overrides;
    for (const auto& s : c.sets) overrides.push_back(parse_override(s));
    if (c.runs) overrides.emplace_back("runs", std::to_string(*c.runs));
    if (c.seed) overrides.emplace_back("seed", std::to_string(*c.seed));
    if (c.per_node) overrides.emplace_back("per_node_msd", "true");
    return load_config(c.config, overrides);
}

// Files are only written once every result is in memory.
struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files;

    void add(std::string name, std::string body) { files.emplace_back(std::move(name), std::move(body)); }

    void flush(const std::string& dir) const {
        fs::create_directories(dir);
        for (const auto& [name, body] : files) {
            const fs::path p = fs::path(dir) / name;
            std::ofstream f(p, std::ios::binary);
            if (!(f << body)) throw Error("cannot write " + p.string());
            std::cout << "wrote " << p.string() << '\n';
        }
    }
};

std::string theory_label(const Common& c, const ExperimentConfig& cfg) {
    if (!c.algorithm.empty()) return c.algorithm;
    if (!cfg.compare_algorithm.empty()) return cfg.compare_algorithm;
    for (const auto& a : cfg.algorithms)
        if (a.kind == EstimatorKind::DMTC && !a.adaptive) return a.label;
    throw ValidationError("compare.algorithm", "no fixed-combination DMTC algorithm configured");
}

int cmd_run(const Common& c) {
    const ExperimentConfig cfg = load(c);
    const Experiment exp = resolve(cfg);
    const auto curves = monte_carlo_msd(exp);

    Artifacts art;
    std::ostringstream csv, summary;
    write_learning_curves(csv, curves);
    write_run_summary(summary, curves, exp.tail_fraction);
    art.add("learning_curves.csv", csv.str());
    art.add("summary.txt", summary.str());
    std::vector<std::string> cols;
    for (const auto& cv : curves) cols.push_back(cv.label);
    art.add("learning_curves.gp", gnuplot_script("learning_curves.csv", cols, "iteration", "MSD (dB)"));
    if (exp.per_node_msd) {
        std::ostringstream nodes;
        write_node_curves(nodes, curves);
        art.add("node_msd.csv", nodes.str());
    }
    art.flush(c.out);
    std::cout << summary.str();
    return kOk;
}

int cmd_sweep(const Common& c) {
    const ExperimentConfig cfg = load(c);
    const std::string name = c.param.empty() ? cfg.sweep.param : c.param;
    const auto param = parse_sweep_param(name);
    if (!param) throw ValidationError("sweep.param", "expected sigma_a2, sigma_b2 or zeta2, got '" + name + "'");
    const auto values = c.values.empty() ? cfg.sweep.values : c.values;
    if (values.empty()) throw ValidationError("sweep.values", "no values to sweep");
    const SweepTable table = sweep(cfg, *param, values);

    Artifacts art;
    std::ostringstream csv;
    write_sweep_table(csv, table);
    art.add("sweep.csv", csv.str());
    art.add("sweep.gp", gnuplot_script("sweep.csv", table.labels, to_string(*param), "steady-state MSD (dB)", true));
    art.flush(c.out);
    std::cout << csv.str();
    return kOk;
}

int cmd_theory(const Common& c) {
    const ExperimentConfig cfg = load(c);
    const Experiment exp = resolve(cfg);
    std::ostringstream rep;
    write_theory_report(rep, theory_report(exp, theory_label(c, cfg)));
    Artifacts art;
    art.add("theory.txt", rep.str());
    art.flush(c.out);
    std::cout << rep.str();
    return kOk;
}

int cmd_compare(const Common& c) {
    const ExperimentConfig cfg = load(c);
    const Experiment exp = resolve(cfg);
    const TheoryComparison cmp = theory_vs_simulation(exp, theory_label(c, cfg));
    std::ostringstream rep, csv;
    write_comparison_report(rep, cmp);
    write_learning_curves(csv, {cmp.curve});
    Artifacts art;
    art.add("compare.txt", rep.str());
    art.add("compare_curve.csv", csv.str());
    art.flush(c.out);
    std::cout << rep.str();
    return kOk;
}

int cmd_validate(const Common& c) {
    const ExperimentConfig cfg = load(c);
    const Experiment exp = resolve(cfg);
    if (const auto v = validate_combination_matrix(exp.model.combination, exp.model.graph)) {
        throw ValidationError("combination", v->message);
    }
    std::cout << "nodes=" << exp.model.size() << '\n';
    std::cout << "edges=" << exp.model.graph.edge_count() << '\n';
    std::cout << "mean_degree=" << format_number(exp.model.graph.mean_degree()) << '\n';
    std::cout << "algorithms=" << exp.algorithms.size() << '\n';
    std::cout << "ok\n";
    return kOk;
}

int guarded(int (*fn)(const Common&), const Common& c) {
    try {
        return fn(c);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kParse;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const InvalidArgument& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const GenerationFailure& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const InstabilityError& e) {
        std::cerr << "instability: " << e.what() << '\n';
        return kInstability;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const EmptyEnsemble& e) {
        std::cerr << "all runs diverged: " << e.what() << '\n';
        return kAllDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
}

void common_flags(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--runs", c.runs, "Monte Carlo runs");
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--set", c.sets, "override, key=value (repeatable)");
    sub->add_flag("--per-node-msd", c.per_node, "also write per-node learning curves");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion adaptation over noisy links"};
    app.require_subcommand(1);
    Common c;

    auto* run = app.add_subcommand("run", "simulate learning curves");
    auto* sw = app.add_subcommand("sweep", "steady-state MSD over a parameter sweep");
    auto* th = app.add_subcommand("theory", "predicted steady-state MSD and step-size bounds");
    auto* cmp = app.add_subcommand("compare", "theory against simulation");
    auto* val = app.add_subcommand("validate", "check config, graph and matrices");
    for (auto* s : {run, sw, th, cmp, val}) common_flags(s, c);
    sw->add_option("--param", c.param, "sigma_a2 | sigma_b2 | zeta2");
    sw->add_option("--values", c.values, "values to sweep")->delimiter(',');
    th->add_option("--algorithm", c.algorithm, "algorithm label");
    cmp->add_option("--algorithm", c.algorithm, "algorithm label");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    if (*run) return guarded(cmd_run, c);
    if (*sw) return guarded(cmd_sweep, c);
    if (*th) return guarded(cmd_theory, c);
    if (*cmp) return guarded(cmd_compare, c);
    return guarded(cmd_validate, c);
}
