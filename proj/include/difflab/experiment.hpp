#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "difflab/engine.hpp"
#include "difflab/noise.hpp"

namespace difflab {

// How a configured step size becomes mu_k.
enum class StepRule {
    Plain,  // mu_k = step_size
    Tls,    // mu_k = step_size * (||h||^2 + mean link gamma)
    // mu_k = step_size / kappa_k, kappa_k the curvature of node k's combined
    // cost at h under the pre-switch kernel, so every node contracts in the
    // mean like an LMS filter with step_size on unit-power input.
    Matched,
};

struct AlgorithmConfig {
    std::string label;
    EstimatorKind kind = EstimatorKind::DLMS;
    bool adaptive = false;
    bool share_data = true;
    bool share_weights = true;
    double step_size = 0.05;
    StepRule step_rule = StepRule::Plain;
    double kernel_before = 1e4;
    // Exactly one of the two is used after the switch; kernel_after wins.
    std::optional<double> kernel_after;
    // Multiple of the reference noise level: sigma_a2 of the input channel
    // for DMTC, sigma_k^2 + 2 sigma_a2 for DMCC.
    std::optional<double> kernel_after_scale;
    std::size_t kernel_switch = 100;
    double chi = 0.05;
    double epsilon = 1e-6;

    friend bool operator==(const AlgorithmConfig&, const AlgorithmConfig&) = default;
};

struct GraphConfig {
    std::string edge_list;  // empty: generate
    std::size_t nodes = 20;
    double avg_degree = 3.0;
    std::uint64_t seed = 1;

    friend bool operator==(const GraphConfig&, const GraphConfig&) = default;
};

struct SweepConfig {
    std::string param;  // sigma_a2 | sigma_b2 | zeta2
    std::vector<double> values;

    friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct ExperimentConfig {
    GraphConfig graph;
    std::vector<double> h;
    std::vector<double> input_variance{1.0};        // one value or one per node
    std::vector<double> observation_variance{0.1};  // one value or one per node
    ChannelSpecs noise_before;
    std::optional<ChannelSpecs> noise_after;
    std::size_t noise_switch = 0;
    std::vector<AlgorithmConfig> algorithms;
    std::size_t iterations = 1000;
    std::size_t runs = 200;
    std::uint64_t seed = 1;
    bool per_node_msd = false;
    double tail_fraction = 0.1;
    SweepConfig sweep;
    std::string compare_algorithm;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

    // Throws ValidationError naming the offending field.
    void validate() const;
    const AlgorithmConfig* find_algorithm(const std::string& label) const;
};

// A config turned into concrete network, noise and per-node step sizes.
struct Experiment {
    NetworkModel model;
    std::vector<AlgorithmSpec> algorithms;
    std::size_t iterations = 0;
    std::size_t runs = 0;
    std::uint64_t seed = 0;
    bool per_node_msd = false;
    double tail_fraction = 0.1;
    std::size_t threads = 0;  // 0: DIFFLAB_THREADS or hardware concurrency

    const AlgorithmSpec& algorithm(const std::string& label) const;
};

Experiment resolve(const ExperimentConfig& config);

// kappa_k above: sum_l a_lk * c_lk with c_kk = sigma_x,k^2, c_lk = sigma_x,l^2
// for quadratic links and sigma_x,l^2 (z/(s + z))^(3/2) / (||h||^2 + gamma_lk)
// for TLS links (z the kernel width, s the link input noise; z -> inf for
// GD-TLS).
double matched_curvature(const NetworkModel& model, EstimatorKind kind, bool share_data, double kernel2,
                         const ChannelSpecs& channels, NodeId k);

// Mean TLS gamma over the network's directed cross links for a channel set.
double mean_link_gamma(const NetworkGraph& graph, const ChannelSpecs& channels,
                       const std::vector<double>& observation_variance);

}  // namespace difflab
