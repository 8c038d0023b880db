#include "difflab/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "difflab/errors.hpp"

namespace difflab {

namespace {

// Runs are simulated in blocks so that memory stays bounded for large
// ensembles while the reduction still happens in run order.
constexpr std::size_t kRunBlock = 64;

// Simulated MSD below this is indistinguishable from zero for a unit-scale
// weight vector.
constexpr double kZeroMsdFloor = 1e-25;

bool blown_up(const std::vector<NodeState>& states) {
    for (const auto& s : states) {
        if (!s.w.allFinite() || s.w.norm() > kDivergenceThreshold) return true;
    }
    return false;
}

template <typename Job>
void parallel_for(std::size_t count, std::size_t workers, Job job) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

RealizationRecord run_single_realization(const Experiment& experiment, const AlgorithmSpec& algo,
                                         std::size_t run_index, bool per_node) {
    if (experiment.iterations == 0) throw InvalidArgument("run_single_realization: at least one iteration is required");
    const NetworkModel& model = experiment.model;
    const std::size_t n = model.size();
    const Substreams streams(experiment.seed, run_index);
    auto states = initial_states(model, algo);

    RealizationRecord rec;
    rec.network_sq_error.reserve(experiment.iterations);
    if (per_node) rec.node_sq_error.reserve(experiment.iterations * n);

    for (std::size_t i = 0; i < experiment.iterations; ++i) {
        if (!rec.diverged) {
            try {
                node_iteration(states, model, algo, i, streams);
            } catch (const InvalidArgument&) {
                // Overflowed payloads surface as weight-sum violations.
                if (!blown_up(states)) throw;
            }
            if (blown_up(states)) {
                rec.diverged = true;
                rec.diverged_at = i + 1;
            }
        }
        if (rec.diverged) {
            // Frozen: repeat the last finite record.
            rec.network_sq_error.push_back(rec.network_sq_error.empty() ? 0.0 : rec.network_sq_error.back());
            if (per_node) {
                for (std::size_t k = 0; k < n; ++k) {
                    rec.node_sq_error.push_back(i == 0 ? 0.0 : rec.node_sq_error[(i - 1) * n + k]);
                }
            }
            continue;
        }
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double err = (states[k].w - model.h).squaredNorm();
            total += err;
            if (per_node) rec.node_sq_error.push_back(err);
        }
        rec.network_sq_error.push_back(total);
    }
    rec.final_w.reserve(n);
    for (const auto& s : states) rec.final_w.push_back(s.w);
    return rec;
}

std::size_t worker_count(const Experiment& experiment) {
    if (experiment.threads > 0) return experiment.threads;
    if (const char* env = std::getenv("DIFFLAB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

LearningCurve monte_carlo_msd(const Experiment& experiment, const AlgorithmSpec& algo) {
    const std::size_t n = experiment.model.size();
    const std::size_t m = experiment.iterations;
    const Eigen::Index L = experiment.model.filter_length();
    const bool per_node = experiment.per_node_msd;
    const std::size_t workers = worker_count(experiment);

    LearningCurve curve;
    curve.label = algo.label;
    std::vector<double> sum(m, 0.0);
    std::vector<double> node_sum(per_node ? m * n : 0, 0.0);
    std::vector<DenseVector> mean(n, DenseVector::Zero(L));
    std::vector<DenseVector> m2(n, DenseVector::Zero(L));

    std::vector<RealizationRecord> block(kRunBlock);
    for (std::size_t first = 0; first < experiment.runs; first += kRunBlock) {
        const std::size_t count = std::min(kRunBlock, experiment.runs - first);
        parallel_for(count, workers, [&](std::size_t j) {
            block[j] = run_single_realization(experiment, algo, first + j, per_node);
        });
        for (std::size_t j = 0; j < count; ++j) {
            const auto& rec = block[j];
            if (rec.diverged) {
                ++curve.diverged_runs;
                continue;
            }
            ++curve.runs_used;
            for (std::size_t i = 0; i < m; ++i) sum[i] += rec.network_sq_error[i];
            for (std::size_t i = 0; i < node_sum.size(); ++i) node_sum[i] += rec.node_sq_error[i];
            const double count_used = static_cast<double>(curve.runs_used);
            for (std::size_t k = 0; k < n; ++k) {
                const DenseVector err = DenseVector(rec.final_w[k] - experiment.model.h);
                const DenseVector delta = err - mean[k];
                mean[k] += delta / count_used;
                m2[k] += delta.cwiseProduct(err - mean[k]);
            }
        }
    }
    if (curve.runs_used == 0) {
        throw EmptyEnsemble(algo.label + ": all " + std::to_string(experiment.runs) + " runs diverged");
    }
    const double norm = static_cast<double>(n) * static_cast<double>(curve.runs_used);
    curve.msd_linear.resize(m);
    for (std::size_t i = 0; i < m; ++i) curve.msd_linear[i] = sum[i] / norm;
    if (per_node) {
        curve.node_msd.assign(n, std::vector<double>(m));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t k = 0; k < n; ++k)
                curve.node_msd[k][i] = node_sum[i * n + k] / static_cast<double>(curve.runs_used);
    }
    curve.final_error_mean = mean;
    curve.final_error_std.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        curve.final_error_std[k] = curve.runs_used > 1
                                       ? DenseVector((m2[k] / static_cast<double>(curve.runs_used - 1)).cwiseSqrt())
                                       : DenseVector::Zero(L);
    }
    return curve;
}

std::vector<LearningCurve> monte_carlo_msd(const Experiment& experiment) {
    std::vector<LearningCurve> out;
    out.reserve(experiment.algorithms.size());
    for (const auto& algo : experiment.algorithms) out.push_back(monte_carlo_msd(experiment, algo));
    return out;
}

double steady_state_linear(const LearningCurve& curve, double tail_fraction) {
    if (curve.msd_linear.empty()) throw InvalidArgument("steady_state_estimate: empty curve");
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw InvalidArgument("tail fraction must lie in (0, 1]");
    const std::size_t m = curve.msd_linear.size();
    const auto tail = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(m))), 1, m);
    double sum = 0.0;
    for (std::size_t i = m - tail; i < m; ++i) sum += curve.msd_linear[i];
    return sum / static_cast<double>(tail);
}

double steady_state_estimate(const LearningCurve& curve, double tail_fraction) {
    return to_db(steady_state_linear(curve, tail_fraction));
}

std::optional<std::size_t> convergence_iteration(const LearningCurve& curve, double steady_db, double margin_db) {
    for (std::size_t i = 0; i < curve.msd_linear.size(); ++i)
        if (curve.msd_db(i) <= steady_db + margin_db) return i + 1;
    return std::nullopt;
}

std::optional<SweepParam> parse_sweep_param(const std::string& name) {
    if (name == "sigma_a2") return SweepParam::SigmaA2;
    if (name == "sigma_b2") return SweepParam::SigmaB2;
    if (name == "zeta2") return SweepParam::Zeta2;
    return std::nullopt;
}

std::string to_string(SweepParam param) {
    switch (param) {
        case SweepParam::SigmaA2: return "sigma_a2";
        case SweepParam::SigmaB2: return "sigma_b2";
        case SweepParam::Zeta2: return "zeta2";
    }
    return "unknown";
}

ExperimentConfig substitute(const ExperimentConfig& config, SweepParam param, double value) {
    ExperimentConfig out = config;
    auto apply = [&](ChannelSpecs& ch) {
        for (GmmSpec* g : {&ch.x, &ch.y, &ch.phi}) {
            if (param == SweepParam::SigmaA2) g->sigma_a2 = value;
            if (param == SweepParam::SigmaB2) g->sigma_b2 = value;
        }
    };
    if (param == SweepParam::Zeta2) {
        for (auto& a : out.algorithms) {
            if (a.kind != EstimatorKind::DMTC) continue;
            a.kernel_after = value;
            a.kernel_after_scale.reset();
        }
        return out;
    }
    apply(out.noise_before);
    if (out.noise_after) apply(*out.noise_after);
    return out;
}

SweepTable sweep(const ExperimentConfig& config, SweepParam param, std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("sweep: no values given");
    std::sort(values.begin(), values.end());
    SweepTable table;
    table.param = param;
    for (const auto& a : config.algorithms) table.labels.push_back(a.label);
    for (double v : values) {
        const Experiment experiment = resolve(substitute(config, param, v));
        SweepRow row;
        row.value = v;
        row.curves = monte_carlo_msd(experiment);
        for (const auto& c : row.curves) row.steady_db.push_back(steady_state_estimate(c, experiment.tail_fraction));
        table.rows.push_back(std::move(row));
    }
    return table;
}

TheoryComparison theory_vs_simulation(const Experiment& experiment, const std::string& label) {
    const AlgorithmSpec& algo = experiment.algorithm(label);
    const NetworkModel& model = experiment.model;
    if (!model.noise.before.all_gaussian() || (model.noise.after && !model.noise.after->all_gaussian())) {
        throw InvalidArgument("theory_vs_simulation: noise must be Gaussian (c = 0)");
    }
    const TheoryInputs inputs = theory_inputs(model, algo, experiment.iterations - 1);

    TheoryComparison out;
    out.label = label;
    for (NodeId k = 0; k < model.size(); ++k) {
        const double bound = stepsize_upper_bound(inputs, k);
        out.stepsize_bounds.push_back(bound);
        if (!(algo.step_sizes[k] < bound)) {
            throw InvalidArgument("theory_vs_simulation: step size of node " + std::to_string(k) +
                                  " is not below its bound " + std::to_string(bound));
        }
    }
    out.rho = mean_recursion_matrix(inputs).rho;
    out.predicted = steady_state_msd(inputs);
    out.curve = monte_carlo_msd(experiment, algo);
    const double simulated = steady_state_linear(out.curve, experiment.tail_fraction);
    out.simulated_db = simulated < kZeroMsdFloor ? -std::numeric_limits<double>::infinity() : to_db(simulated);
    const bool both_zero = std::isinf(out.simulated_db) && std::isinf(out.predicted.msd_db);
    out.gap_db = both_zero ? 0.0 : out.simulated_db - out.predicted.msd_db;
    return out;
}

}  // namespace difflab
