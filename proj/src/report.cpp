#include "difflab/report.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

namespace difflab {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

namespace {

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_number(values[i]);
    return out;
}

const char* method_name(SpectralMethod m) {
    return m == SpectralMethod::PowerIteration ? "power" : "dense";
}

}  // namespace

void write_learning_curves(std::ostream& out, const std::vector<LearningCurve>& curves) {
    out << "iteration";
    for (const auto& c : curves) out << ',' << c.label << "_msd_db";
    out << '\n';
    const std::size_t n = curves.empty() ? 0 : curves.front().iterations();
    for (std::size_t i = 0; i < n; ++i) {
        out << i + 1;
        for (const auto& c : curves) out << ',' << format_number(c.msd_db(i));
        out << '\n';
    }
}

void write_node_curves(std::ostream& out, const std::vector<LearningCurve>& curves) {
    out << "iteration";
    std::size_t n = 0;
    for (const auto& c : curves) {
        for (std::size_t k = 0; k < c.node_msd.size(); ++k) out << ',' << c.label << "_node" << k << "_msd_db";
        if (!c.node_msd.empty()) n = c.iterations();
    }
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << i + 1;
        for (const auto& c : curves)
            for (const auto& node : c.node_msd) out << ',' << format_number(to_db(node[i]));
        out << '\n';
    }
}

void write_sweep_table(std::ostream& out, const SweepTable& table) {
    out << "param_value";
    for (const auto& label : table.labels) out << ',' << label << "_steady_db";
    out << '\n';
    for (const auto& row : table.rows) {
        out << format_number(row.value);
        for (double v : row.steady_db) out << ',' << format_number(v);
        out << '\n';
    }
}

TheoryReport theory_report(const Experiment& experiment, const std::string& label) {
    const AlgorithmSpec& algo = experiment.algorithm(label);
    const TheoryInputs inputs = theory_inputs(experiment.model, algo, experiment.iterations - 1);
    TheoryReport r;
    r.label = label;
    r.mu = algo.step_sizes;
    for (NodeId k = 0; k < experiment.model.size(); ++k) r.stepsize_bounds.push_back(stepsize_upper_bound(inputs, k));
    r.rho = mean_recursion_matrix(inputs).rho;
    r.msd = steady_state_msd(inputs);
    r.tradeoff = combination_noise_tradeoff(inputs);
    return r;
}

void write_theory_report(std::ostream& out, const TheoryReport& r) {
    out << "algorithm=" << r.label << '\n';
    out << "nodes=" << r.mu.size() << '\n';
    out << "mu=" << join(r.mu) << '\n';
    out << "stepsize_bound=" << join(r.stepsize_bounds) << '\n';
    out << "mean_recursion_rho=" << format_number(r.rho.value) << '\n';
    out << "mean_recursion_rho_method=" << method_name(r.rho.method) << '\n';
    out << "predicted_msd_linear=" << format_number(r.msd.msd_linear) << '\n';
    out << "predicted_msd_db=" << format_number(r.msd.msd_db) << '\n';
    out << "lyapunov_iterations=" << r.msd.iterations_used << '\n';
    out << "combination_noise_part=" << join(r.tradeoff.combination_part) << '\n';
    out << "adaptation_noise_part=" << join(r.tradeoff.adaptation_part) << '\n';
    out << "per_node_noise_trace=" << join(r.tradeoff.per_node) << '\n';
}

void write_comparison_report(std::ostream& out, const TheoryComparison& c) {
    out << "algorithm=" << c.label << '\n';
    out << "stepsize_bound=" << join(c.stepsize_bounds) << '\n';
    out << "mean_recursion_rho=" << format_number(c.rho.value) << '\n';
    out << "predicted_msd_db=" << format_number(c.predicted.msd_db) << '\n';
    out << "simulated_msd_db=" << format_number(c.simulated_db) << '\n';
    out << "gap_db=" << format_number(c.gap_db) << '\n';
    out << "runs_used=" << c.curve.runs_used << '\n';
    out << "diverged_runs=" << c.curve.diverged_runs << '\n';
}

void write_run_summary(std::ostream& out, const std::vector<LearningCurve>& curves, double tail_fraction) {
    for (const auto& c : curves) {
        out << c.label << ".runs_used=" << c.runs_used << '\n';
        out << c.label << ".diverged_runs=" << c.diverged_runs << '\n';
        out << c.label << ".steady_db=" << format_number(steady_state_estimate(c, tail_fraction)) << '\n';
    }
}

std::string gnuplot_script(const std::string& csv_name, const std::vector<std::string>& columns,
                           const std::string& xlabel, const std::string& ylabel, bool logx) {
    std::ostringstream s;
    s << "set datafile separator ','\n";
    s << "set key autotitle columnhead\n";
    s << "set xlabel '" << xlabel << "'\n";
    s << "set ylabel '" << ylabel << "'\n";
    if (logx) s << "set logscale x\n";
    s << "set grid\n";
    s << "plot ";
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) s << ", \\\n     ";
        s << "'" << csv_name << "' using 1:" << i + 2 << " with lines title '" << columns[i] << "'";
    }
    s << '\n';
    return s.str();
}

}  // namespace difflab
