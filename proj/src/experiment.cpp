#include "difflab/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "difflab/errors.hpp"

namespace difflab {

namespace {

void check_gmm(const GmmSpec& g, const std::string& field) {
    try {
        g.validate();
    } catch (const InvalidArgument& e) {
        throw ValidationError(field, e.what());
    }
}

void check_channels(const ChannelSpecs& ch, const std::string& prefix) {
    check_gmm(ch.x, prefix + ".x");
    check_gmm(ch.y, prefix + ".y");
    check_gmm(ch.phi, prefix + ".phi");
}

void check_per_node(const std::vector<double>& v, std::size_t n, const std::string& field) {
    if (v.size() != 1 && v.size() != n) {
        throw ValidationError(field, "expected 1 or " + std::to_string(n) + " values, got " + std::to_string(v.size()));
    }
    for (double x : v)
        if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError(field, "variances must be finite and >= 0");
}

std::vector<double> broadcast(const std::vector<double>& v, std::size_t n) {
    return v.size() == 1 ? std::vector<double>(n, v.front()) : v;
}

bool valid_label(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
}

}  // namespace

const AlgorithmConfig* ExperimentConfig::find_algorithm(const std::string& label) const {
    for (const auto& a : algorithms)
        if (a.label == label) return &a;
    return nullptr;
}

void ExperimentConfig::validate() const {
    if (iterations < 1) throw ValidationError("iterations", "must be >= 1");
    if (runs < 1) throw ValidationError("runs", "must be >= 1");
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw ValidationError("tail_fraction", "must lie in (0, 1]");
    if (h.empty()) throw ValidationError("signal.h", "must not be empty");
    if (h.size() > static_cast<std::size_t>(kMaxFilterLength)) {
        throw ValidationError("signal.h", "filter length above " + std::to_string(kMaxFilterLength));
    }
    for (double v : h)
        if (!std::isfinite(v)) throw ValidationError("signal.h", "entries must be finite");
    if (graph.edge_list.empty()) {
        if (graph.nodes < 2) throw ValidationError("graph.nodes", "must be >= 2");
        if (!(graph.avg_degree > 0.0) || graph.avg_degree > static_cast<double>(graph.nodes - 1)) {
            throw ValidationError("graph.avg_degree", "must lie in (0, nodes - 1]");
        }
    }
    const std::size_t n = graph.nodes;
    if (graph.edge_list.empty()) {
        check_per_node(input_variance, n, "signal.input_variance");
        check_per_node(observation_variance, n, "signal.observation_variance");
    }
    check_channels(noise_before, "noise.before");
    if (noise_after) check_channels(*noise_after, "noise.after");
    if (algorithms.empty()) throw ValidationError("algorithm", "at least one algorithm section is required");
    std::set<std::string> seen;
    for (const auto& a : algorithms) {
        const std::string f = "algorithm." + a.label;
        if (!valid_label(a.label)) throw ValidationError(f, "labels may use letters, digits, '-' and '_' only");
        if (!seen.insert(a.label).second) throw ValidationError(f, "duplicate label");
        if (!(a.step_size > 0.0) || !std::isfinite(a.step_size)) throw ValidationError(f + ".step_size", "must be positive");
        if (!(a.kernel_before > 0.0)) throw ValidationError(f + ".kernel_before", "must be positive");
        if (a.kernel_after && !(*a.kernel_after > 0.0)) throw ValidationError(f + ".kernel_after", "must be positive");
        if (a.kernel_after_scale && !(*a.kernel_after_scale > 0.0)) {
            throw ValidationError(f + ".kernel_after_scale", "must be positive");
        }
        if (!(a.chi > 0.0 && a.chi <= 1.0)) throw ValidationError(f + ".chi", "must lie in (0, 1]");
        if (!(a.epsilon > 0.0)) throw ValidationError(f + ".epsilon", "must be positive");
        if (a.adaptive && !a.share_weights) throw ValidationError(f + ".adaptive", "requires share_weights = true");
        if (a.kind == EstimatorKind::NonCoopLMS && (a.adaptive || a.share_data || a.share_weights)) {
            throw ValidationError(f + ".kind", "NonCoopLMS must not share data or weights");
        }
    }
    if (!sweep.param.empty() && sweep.param != "sigma_a2" && sweep.param != "sigma_b2" && sweep.param != "zeta2") {
        throw ValidationError("sweep.param", "must be one of sigma_a2, sigma_b2, zeta2");
    }
    for (double v : sweep.values)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("sweep.values", "must be finite and >= 0");
    if (!compare_algorithm.empty() && !find_algorithm(compare_algorithm)) {
        throw ValidationError("compare.algorithm", "no algorithm labelled '" + compare_algorithm + "'");
    }
}

const AlgorithmSpec& Experiment::algorithm(const std::string& label) const {
    for (const auto& a : algorithms)
        if (a.label == label) return a;
    throw InvalidArgument("no algorithm labelled '" + label + "'");
}

double matched_curvature(const NetworkModel& model, EstimatorKind kind, bool share_data, double kernel2,
                         const ChannelSpecs& channels, NodeId k) {
    const bool tls = kind == EstimatorKind::DMTC || kind == EstimatorKind::DGDTLS;
    const double hh = model.h.squaredNorm();
    double kappa = 0.0;
    for (NodeId l : model.graph.neighborhood(k)) {
        const double a = share_data ? model.adaptation(l, k) : (l == k ? 1.0 : 0.0);
        if (a == 0.0) continue;
        double c = model.input_variance[l];
        if (l != k && tls && channels.x.sigma_a2 > 0.0) {
            const double s = channels.x.sigma_a2;
            const double gamma = gamma_lk(model.noise.before.observation_variance(l), channels.y.sigma_a2, s);
            const double shrink = kind == EstimatorKind::DMTC ? std::pow(kernel2 / (s + kernel2), 1.5) : 1.0;
            c *= shrink / (hh + gamma);
        }
        kappa += a * c;
    }
    if (!(kappa > 0.0)) throw ValidationError("signal.input_variance", "node " + std::to_string(k) + " has zero input power");
    return kappa;
}

double mean_link_gamma(const NetworkGraph& graph, const ChannelSpecs& channels,
                       const std::vector<double>& observation_variance) {
    double sum = 0.0;
    std::size_t count = 0;
    for (NodeId k = 0; k < graph.size(); ++k) {
        for (NodeId l : graph.neighborhood(k)) {
            if (l == k) continue;
            sum += gamma_lk(observation_variance.at(l), channels.y.sigma_a2, channels.x.sigma_a2);
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

Experiment resolve(const ExperimentConfig& config) {
    config.validate();
    NetworkGraph graph = config.graph.edge_list.empty()
                             ? generate_random_graph(config.graph.nodes, config.graph.avg_degree, config.graph.seed)
                             : load_edge_list(config.graph.edge_list);
    const std::size_t n = graph.size();
    check_per_node(config.input_variance, n, "signal.input_variance");
    check_per_node(config.observation_variance, n, "signal.observation_variance");
    const auto obs = broadcast(config.observation_variance, n);

    const CombinationMatrix metropolis = metropolis_weights(graph);
    Vector h = Eigen::Map<const DenseVector>(config.h.data(), static_cast<Eigen::Index>(config.h.size()));
    NoiseSchedule noise{LinkNoiseSpec(n, config.noise_before, obs), std::nullopt, config.noise_switch};
    if (config.noise_after) noise.after = LinkNoiseSpec(n, *config.noise_after, obs);
    const ChannelSpecs& final_channels = config.noise_after ? *config.noise_after : config.noise_before;

    Experiment out{
        NetworkModel{graph, metropolis.with_role(MatrixRole::Adaptation), metropolis, h,
                     broadcast(config.input_variance, n), std::move(noise)},
        {},
        config.iterations,
        config.runs,
        config.seed,
        config.per_node_msd,
        config.tail_fraction,
        0,
    };

    double mean_obs = 0.0;
    for (double v : obs) mean_obs += v / static_cast<double>(n);

    for (const auto& a : config.algorithms) {
        const std::string f = "algorithm." + a.label;
        AlgorithmSpec spec;
        spec.label = a.label;
        spec.kind = a.kind;
        spec.adaptive_combination = a.adaptive;
        spec.share_data = a.share_data;
        spec.share_weights = a.share_weights;
        double mu = a.step_size;
        if (a.step_rule == StepRule::Tls) {
            if (!(config.noise_before.x.sigma_a2 > 0.0)) {
                throw ValidationError(f + ".step_rule", "tls rule needs input-channel noise (sigma_a2 > 0)");
            }
            mu *= h.squaredNorm() + mean_link_gamma(graph, config.noise_before, obs);
        }
        spec.step_sizes.assign(n, mu);
        if (a.step_rule == StepRule::Matched) {
            for (NodeId k = 0; k < n; ++k) {
                spec.step_sizes[k] =
                    a.step_size / matched_curvature(out.model, a.kind, a.share_data, a.kernel_before, config.noise_before, k);
            }
        }
        spec.kernel.before = a.kernel_before;
        spec.kernel.switch_iteration = a.kernel_switch;
        if (a.kernel_after) {
            spec.kernel.after = *a.kernel_after;
        } else if (a.kernel_after_scale) {
            const double ref = a.kind == EstimatorKind::DMCC ? mean_obs + 2.0 * final_channels.x.sigma_a2
                                                             : final_channels.x.sigma_a2;
            if (!(ref > 0.0)) throw ValidationError(f + ".kernel_after_scale", "reference noise level is zero");
            spec.kernel.after = *a.kernel_after_scale * ref;
        } else {
            spec.kernel.after = a.kernel_before;
        }
        spec.chi = a.chi;
        spec.epsilon = a.epsilon;
        try {
            spec.validate(n);
        } catch (const InvalidArgument& e) {
            throw ValidationError(f, e.what());
        }
        out.algorithms.push_back(std::move(spec));
    }
    out.model.validate();
    return out;
}

}  // namespace difflab
