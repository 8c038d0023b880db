#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "difflab/sim.hpp"
#include "difflab/theory.hpp"

namespace difflab {

// Shortest round-trip decimal; -inf, inf and nan spelled out.
std::string format_number(double v);

// iteration,<label>_msd_db,...
void write_learning_curves(std::ostream& out, const std::vector<LearningCurve>& curves);
// iteration,<label>_node<k>_msd_db,... for curves that carry node_msd.
void write_node_curves(std::ostream& out, const std::vector<LearningCurve>& curves);
// param_value,<label>_steady_db,...
void write_sweep_table(std::ostream& out, const SweepTable& table);

struct TheoryReport {
    std::string label;
    std::vector<double> mu;
    std::vector<double> stepsize_bounds;
    SpectralRadius rho;
    MsdPrediction msd;
    TradeoffReport tradeoff;
};

TheoryReport theory_report(const Experiment& experiment, const std::string& label);

void write_theory_report(std::ostream& out, const TheoryReport& report);
void write_comparison_report(std::ostream& out, const TheoryComparison& comparison);

// Per-algorithm diverged/used run counts as key=value lines.
void write_run_summary(std::ostream& out, const std::vector<LearningCurve>& curves, double tail_fraction);

// gnuplot script that plots every data column of `csv_name` against column 1.
std::string gnuplot_script(const std::string& csv_name, const std::vector<std::string>& columns,
                           const std::string& xlabel, const std::string& ylabel, bool logx = false);

}  // namespace difflab
