#pragma once

// Closed-form steady-state analysis of DMTC with a fixed combination matrix
// under Gaussian noise: per-link Hessians and gradient covariances at the
// optimum, the mean recursion, step-size bounds and the steady-state MSD.
//
// The analysis is written for the gradient the engine actually applies on a
// cross link, zeta^2 * mtc_gradient, so its Hessian is that of zeta^2 times
// the correntropy cost.

#include <cstddef>
#include <limits>
#include <vector>

#include "difflab/linalg.hpp"
#include "difflab/topology.hpp"
#include "difflab/types.hpp"

namespace difflab {

struct NetworkModel;
struct AlgorithmSpec;

struct TheoryInputs {
    DenseVector h;
    std::vector<Matrix> R;               // per node, L x L
    NetworkGraph graph;
    CombinationMatrix adaptation;        // A
    CombinationMatrix combination;       // C
    std::vector<double> sigma2_obs;      // per node
    std::vector<double> mu;              // per node
    // Per directed link, indexed (l, k). A NaN gamma marks a link without
    // input noise, which the engine runs on the LMS path.
    Matrix sigma2_x;
    Matrix sigma2_y;
    Matrix sigma2_phi;
    Matrix gamma;
    Matrix zeta2;

    std::size_t size() const noexcept { return graph.size(); }
    Eigen::Index filter_length() const noexcept { return h.size(); }
    void validate() const;
};

// Inputs matching a simulated DMTC network at the noise phase active at
// `iteration`, with the kernel at its post-switch value. Uses the
// outlier-free variances only. A = I when data is not shared, C = I when
// weights are not shared.
TheoryInputs theory_inputs(const NetworkModel& model, const AlgorithmSpec& spec, std::size_t iteration);

Matrix hessian_at_optimum(const TheoryInputs& in, NodeId l, NodeId k);
Matrix gradient_covariance(const TheoryInputs& in, NodeId l, NodeId k);

// sum_l alpha_lk H_lk(h), the L x L block of node k.
Matrix summed_hessian(const TheoryInputs& in, NodeId k);

struct MeanRecursion {
    Matrix B;  // (C kron I)^T (I + M H)
    SpectralRadius rho;
};

MeanRecursion mean_recursion_matrix(const TheoryInputs& in);

// 2 / rho(sum_l alpha_lk H_lk(h)). Throws InvalidArgument when the summed
// Hessian vanishes (unbounded step size).
double stepsize_upper_bound(const TheoryInputs& in, NodeId k);

struct NoiseCovariances {
    Matrix V;  // combination-step noise
    Matrix R;  // adaptation-step gradient noise, mapped through the combiner
};

NoiseCovariances steady_state_noise(const TheoryInputs& in);

struct MsdPrediction {
    double msd_linear = 0.0;
    double msd_db = -std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t iterations_used = 0;
};

inline constexpr double kLyapunovTolerance = 1e-12;
inline constexpr std::size_t kLyapunovIterationCap = 100000;

// (1/N) vec{V + R}^T (I - F)^{-1} vec{I}, with the inverse applied through
// S <- I + B^T S B instead of forming F. Throws InstabilityError when
// rho(B) >= 1 and NumericalFailure when the series does not settle.
MsdPrediction steady_state_msd(const TheoryInputs& in);

struct TradeoffReport {
    double total = 0.0;
    std::vector<double> per_node;
    std::vector<double> combination_part;  // Tr of V block
    std::vector<double> adaptation_part;   // Tr of R block
};

TradeoffReport combination_noise_tradeoff(const TheoryInputs& in);

double to_db(double linear);

}  // namespace difflab
