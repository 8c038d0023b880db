#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "difflab/noise.hpp"
#include "difflab/rng.hpp"
#include "difflab/topology.hpp"
#include "difflab/types.hpp"

namespace difflab {

enum class EstimatorKind { NonCoopLMS, DLMS, DMCC, DGDTLS, DMTC };

std::string_view to_string(EstimatorKind kind);
std::optional<EstimatorKind> parse_estimator_kind(std::string_view name);

// Piecewise-constant kernel width (squared): `before` for i < switch_iteration,
// `after` from then on.
struct KernelSchedule {
    double before = 1e4;
    double after = 1e4;
    std::size_t switch_iteration = 0;

    double at(std::size_t iteration) const noexcept { return iteration < switch_iteration ? before : after; }

    friend bool operator==(const KernelSchedule&, const KernelSchedule&) = default;
};

struct AlgorithmSpec {
    std::string label;
    EstimatorKind kind = EstimatorKind::DLMS;
    bool adaptive_combination = false;
    bool share_data = true;      // false models A = I
    bool share_weights = true;   // false models C = I
    std::vector<double> step_sizes;  // one per node
    KernelSchedule kernel;           // zeta^2 for DMTC, MCC kernel for DMCC
    double chi = 0.05;
    double epsilon = 1e-6;

    void validate(std::size_t n_nodes) const;
    bool uses_kernel() const noexcept { return kind == EstimatorKind::DMTC || kind == EstimatorKind::DMCC; }
};

// One (x, y) pair as received by a node; for a self link it is the node's
// own measurement.
struct SharedSample {
    Vector x;
    double y = 0.0;
    NodeId source = 0;
    bool self_link = true;
};

// A received sample together with the parameters its link needs.
struct LinkSample {
    SharedSample sample;
    double alpha = 0.0;
    double gamma = 0.0;      // TLS normalization; ignored on self links
    double kernel2 = 1e4;    // zeta^2 (DMTC) or MCC kernel (DMCC)
    bool tls_defined = true; // false when the link carries no input noise
};

// delta2 and beta_row are aligned with graph.neighborhood(k).
struct NodeState {
    Vector w;
    Vector phi;
    std::vector<double> delta2;
    std::vector<double> beta_row;
};

inline double residual(const Vector& w, const SharedSample& s) { return s.y - w.dot(s.x); }

Vector lms_gradient(const Vector& w, const SharedSample& sample);
Vector mcc_gradient(const Vector& w, const SharedSample& sample, double kernel2);
double mtc_cost(const Vector& w, const SharedSample& sample, double zeta2, double gamma);
// Exact gradient of mtc_cost with respect to w.
Vector mtc_gradient(const Vector& w, const SharedSample& sample, double zeta2, double gamma);
Vector gdtls_gradient(const Vector& w, const SharedSample& sample, double gamma);

// The direction a node applies for one received sample. Self links always use
// the LMS gradient. Cross links use the algorithm's estimator; the MTC
// gradient enters as zeta2 * mtc_gradient (the 1/zeta^2 factor of the
// correntropy cost is carried by the step size).
Vector link_gradient(EstimatorKind kind, const Vector& w, const LinkSample& link);

// phi = w + mu * sum_l alpha_lk * g_lk(w).
Vector adapt_step(const NodeState& state, std::span<const LinkSample> received, const AlgorithmSpec& spec,
                  double mu);

struct WeightedPhi {
    Vector phi;
    double beta = 0.0;
};

inline constexpr double kWeightSumTolerance = 1e-10;

// w = sum_l beta_lk * phi_lk, or phi_k itself when weights are not shared.
Vector combine_step(const NodeState& state, std::span<const WeightedPhi> received, bool share_weights = true);

// w + mu * g / (||g||^2 + eps) with g the node's own LMS gradient.
Vector local_one_step(const Vector& w, const SharedSample& self_sample, double mu, double epsilon);

inline constexpr double kDelta2Floor = 1e-12;
inline constexpr double kInitialDelta2 = 1.0;

struct BetaUpdate {
    std::vector<double> delta2;
    std::vector<double> beta;
};

// Smoothed squared deviations of the received intermediates from w_hat and
// the inverse-deviation weights they induce. Entries are aligned with the
// node's neighborhood.
BetaUpdate adaptive_beta_update(std::span<const double> prev_delta2, std::span<const Vector> received_phis,
                                const Vector& w_hat, double chi);

// Everything a synchronous network iteration needs besides the node states.
struct NetworkModel {
    NetworkGraph graph;
    CombinationMatrix adaptation;   // A
    CombinationMatrix combination;  // C, also the initial adaptive beta
    Vector h;
    std::vector<double> input_variance;  // per node, R_k = input_variance[k] * I
    NoiseSchedule noise;

    std::size_t size() const noexcept { return graph.size(); }
    Eigen::Index filter_length() const noexcept { return h.size(); }
    void validate() const;
};

std::vector<NodeState> initial_states(const NetworkModel& model, const AlgorithmSpec& spec);

// Node l's own clean regressor and noisy output for one iteration, drawn from
// its Data substream.
SharedSample draw_node_data(const NetworkModel& model, const Substreams& streams, std::size_t iteration,
                            NodeId l);

// One adapt-then-combine step for every node, using iteration-i states only.
void node_iteration(std::vector<NodeState>& states, const NetworkModel& model, const AlgorithmSpec& spec,
                    std::size_t iteration, const Substreams& streams);

}  // namespace difflab
