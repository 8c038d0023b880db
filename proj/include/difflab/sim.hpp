#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "difflab/experiment.hpp"
#include "difflab/theory.hpp"

namespace difflab {

// A run is declared diverged once any ||w_k|| exceeds this (or goes
// non-finite); its record is frozen from that iteration on.
inline constexpr double kDivergenceThreshold = 1e6;

struct RealizationRecord {
    // sum_k ||w_k(i) - h||^2 after iteration i, i = 1..iterations.
    std::vector<double> network_sq_error;
    // ||w_k(i) - h||^2, row-major [iteration][node]; empty unless requested.
    std::vector<double> node_sq_error;
    bool diverged = false;
    std::optional<std::size_t> diverged_at;
    std::vector<Vector> final_w;
};

// Starts from w_k(0) = 0 and iterates the network. Deterministic in
// (experiment seed, run_index). Throws InvalidArgument for zero iterations.
RealizationRecord run_single_realization(const Experiment& experiment, const AlgorithmSpec& algo,
                                         std::size_t run_index, bool per_node = false);

struct LearningCurve {
    std::string label;
    std::vector<double> msd_linear;            // index i-1 holds iteration i
    std::vector<std::vector<double>> node_msd;  // [node][iteration], optional
    std::size_t runs_used = 0;
    std::size_t diverged_runs = 0;
    // Across-run mean and standard deviation of w_k(final) - h, per node.
    std::vector<DenseVector> final_error_mean;
    std::vector<DenseVector> final_error_std;

    std::size_t iterations() const noexcept { return msd_linear.size(); }
    double msd_db(std::size_t index) const { return to_db(msd_linear.at(index)); }
};

// Number of workers: experiment.threads if set, else DIFFLAB_THREADS, else
// hardware concurrency.
std::size_t worker_count(const Experiment& experiment);

// One curve per configured algorithm. Runs execute concurrently; sums are
// accumulated in run order so the result does not depend on the worker
// count. Throws EmptyEnsemble when every run of an algorithm diverged.
std::vector<LearningCurve> monte_carlo_msd(const Experiment& experiment);
LearningCurve monte_carlo_msd(const Experiment& experiment, const AlgorithmSpec& algo);

// Mean of msd_linear over the last ceil(tail_fraction * iterations) samples,
// in dB.
double steady_state_estimate(const LearningCurve& curve, double tail_fraction);
double steady_state_linear(const LearningCurve& curve, double tail_fraction);

// First iteration (1-based) whose MSD is within margin_db of steady_db.
std::optional<std::size_t> convergence_iteration(const LearningCurve& curve, double steady_db,
                                                 double margin_db = 3.0);

enum class SweepParam { SigmaA2, SigmaB2, Zeta2 };
std::optional<SweepParam> parse_sweep_param(const std::string& name);
std::string to_string(SweepParam param);

// Substitutes `value` into every link channel of every noise phase
// (sigma_a2, sigma_b2) or into the post-switch kernel of every DMTC
// algorithm (zeta2).
ExperimentConfig substitute(const ExperimentConfig& config, SweepParam param, double value);

struct SweepRow {
    double value = 0.0;
    std::vector<double> steady_db;  // per algorithm
    std::vector<LearningCurve> curves;
};

struct SweepTable {
    SweepParam param = SweepParam::SigmaA2;
    std::vector<std::string> labels;
    std::vector<SweepRow> rows;  // sorted by value
};

SweepTable sweep(const ExperimentConfig& config, SweepParam param, std::vector<double> values);

struct TheoryComparison {
    std::string label;
    MsdPrediction predicted;
    double simulated_db = 0.0;
    double gap_db = 0.0;  // simulated - predicted; 0 when both are -inf
    std::vector<double> stepsize_bounds;
    SpectralRadius rho;
    LearningCurve curve;
};

// Theory at the final noise phase and post-switch kernel against the
// simulated steady state of the named algorithm. Requires Gaussian noise,
// a fixed-combination DMTC algorithm, and step sizes below every bound.
TheoryComparison theory_vs_simulation(const Experiment& experiment, const std::string& label);

}  // namespace difflab
