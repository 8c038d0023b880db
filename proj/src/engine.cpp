#include "difflab/engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "difflab/errors.hpp"

namespace difflab {

namespace {

constexpr std::array<std::pair<EstimatorKind, std::string_view>, 5> kKindNames{{
    {EstimatorKind::NonCoopLMS, "NonCoopLMS"},
    {EstimatorKind::DLMS, "DLMS"},
    {EstimatorKind::DMCC, "DMCC"},
    {EstimatorKind::DGDTLS, "DGDTLS"},
    {EstimatorKind::DMTC, "DMTC"},
}};

double tls_denominator(const Vector& w, double gamma) {
    const double d = w.squaredNorm() + gamma;
    if (!(d > 0.0)) throw InvalidArgument("||w||^2 + gamma must be positive");
    return d;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "unknown";
}

std::optional<EstimatorKind> parse_estimator_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames)
        if (n == name) return k;
    return std::nullopt;
}

void AlgorithmSpec::validate(std::size_t n_nodes) const {
    const std::string who = label.empty() ? std::string(to_string(kind)) : label;
    if (step_sizes.size() != n_nodes) {
        throw InvalidArgument(who + ": expected " + std::to_string(n_nodes) + " step sizes, got " +
                              std::to_string(step_sizes.size()));
    }
    for (double mu : step_sizes)
        if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument(who + ": step sizes must be positive");
    if (!(kernel.before > 0.0) || !(kernel.after > 0.0)) throw InvalidArgument(who + ": kernel values must be positive");
    if (!(chi > 0.0 && chi <= 1.0)) throw InvalidArgument(who + ": chi must lie in (0, 1]");
    if (!(epsilon > 0.0)) throw InvalidArgument(who + ": epsilon must be positive");
    if (kind == EstimatorKind::NonCoopLMS && (share_data || share_weights || adaptive_combination)) {
        throw InvalidArgument(who + ": NonCoopLMS shares neither data nor weights");
    }
    if (adaptive_combination && !share_weights) {
        throw InvalidArgument(who + ": adaptive combination requires weight sharing");
    }
}

Vector lms_gradient(const Vector& w, const SharedSample& sample) {
    if (w.size() != sample.x.size()) throw InvalidArgument("lms_gradient: dimension mismatch");
    const double e = residual(w, sample);
    return e * sample.x;
}

Vector mcc_gradient(const Vector& w, const SharedSample& sample, double kernel2) {
    if (!(kernel2 > 0.0)) throw InvalidArgument("mcc_gradient: kernel must be positive");
    if (w.size() != sample.x.size()) throw InvalidArgument("mcc_gradient: dimension mismatch");
    const double e = residual(w, sample);
    return (std::exp(-e * e / (2.0 * kernel2)) * e) * sample.x;
}

double mtc_cost(const Vector& w, const SharedSample& sample, double zeta2, double gamma) {
    if (!(zeta2 > 0.0)) throw InvalidArgument("mtc_cost: zeta2 must be positive");
    const double d = tls_denominator(w, gamma);
    const double e = residual(w, sample);
    return std::exp(-e * e / (2.0 * zeta2 * d));
}

Vector mtc_gradient(const Vector& w, const SharedSample& sample, double zeta2, double gamma) {
    if (!(zeta2 > 0.0)) throw InvalidArgument("mtc_gradient: zeta2 must be positive");
    if (w.size() != sample.x.size()) throw InvalidArgument("mtc_gradient: dimension mismatch");
    const double d = tls_denominator(w, gamma);
    const double e = residual(w, sample);
    const double g = std::exp(-e * e / (2.0 * zeta2 * d));
    const double scale = g / (zeta2 * d * d);
    return scale * (d * e * sample.x + (e * e) * w);
}

Vector gdtls_gradient(const Vector& w, const SharedSample& sample, double gamma) {
    if (w.size() != sample.x.size()) throw InvalidArgument("gdtls_gradient: dimension mismatch");
    const double d = tls_denominator(w, gamma);
    const double e = residual(w, sample);
    return (d * e * sample.x + (e * e) * w) / (d * d);
}

Vector link_gradient(EstimatorKind kind, const Vector& w, const LinkSample& link) {
    if (link.sample.self_link) return lms_gradient(w, link.sample);
    switch (kind) {
        case EstimatorKind::NonCoopLMS:
        case EstimatorKind::DLMS:
            return lms_gradient(w, link.sample);
        case EstimatorKind::DMCC:
            return mcc_gradient(w, link.sample, link.kernel2);
        case EstimatorKind::DGDTLS:
            return link.tls_defined ? gdtls_gradient(w, link.sample, link.gamma) : lms_gradient(w, link.sample);
        case EstimatorKind::DMTC:
            if (!link.tls_defined) return lms_gradient(w, link.sample);
            return link.kernel2 * mtc_gradient(w, link.sample, link.kernel2, link.gamma);
    }
    throw InvalidArgument("unknown estimator kind");
}

Vector adapt_step(const NodeState& state, std::span<const LinkSample> received, const AlgorithmSpec& spec,
                  double mu) {
    double alpha_sum = 0.0;
    bool has_self = false;
    Vector acc = Vector::Zero(state.w.size());
    for (const auto& link : received) {
        if (link.alpha < 0.0) throw InvalidArgument("adapt_step: negative alpha");
        alpha_sum += link.alpha;
        has_self = has_self || link.sample.self_link;
        if (link.alpha == 0.0) continue;
        acc += link.alpha * link_gradient(spec.kind, state.w, link);
    }
    if (!has_self) throw InvalidArgument("adapt_step: the node's own sample is missing");
    if (std::abs(alpha_sum - 1.0) > kWeightSumTolerance) {
        throw InvalidArgument("adapt_step: adaptation weights sum to " + std::to_string(alpha_sum));
    }
    return state.w + mu * acc;
}

Vector combine_step(const NodeState& state, std::span<const WeightedPhi> received, bool share_weights) {
    if (!share_weights) return state.phi;
    if (received.empty()) throw InvalidArgument("combine_step: nothing to combine");
    double beta_sum = 0.0;
    Vector w = Vector::Zero(received.front().phi.size());
    for (const auto& r : received) {
        if (r.beta < 0.0) throw InvalidArgument("combine_step: negative combination weight");
        beta_sum += r.beta;
        if (r.beta == 0.0) continue;
        w += r.beta * r.phi;
    }
    if (std::abs(beta_sum - 1.0) > kWeightSumTolerance) {
        throw InvalidArgument("combine_step: combination weights sum to " + std::to_string(beta_sum));
    }
    return w;
}

Vector local_one_step(const Vector& w, const SharedSample& self_sample, double mu, double epsilon) {
    if (!(epsilon > 0.0)) throw InvalidArgument("local_one_step: epsilon must be positive");
    const Vector g = lms_gradient(w, self_sample);
    return w + (mu / (g.squaredNorm() + epsilon)) * g;
}

BetaUpdate adaptive_beta_update(std::span<const double> prev_delta2, std::span<const Vector> received_phis,
                                const Vector& w_hat, double chi) {
    if (prev_delta2.size() != received_phis.size()) {
        throw InvalidArgument("adaptive_beta_update: neighborhood size mismatch");
    }
    if (!(chi >= 0.0 && chi <= 1.0)) throw InvalidArgument("adaptive_beta_update: chi must lie in [0, 1]");
    BetaUpdate out;
    out.delta2.resize(prev_delta2.size());
    out.beta.resize(prev_delta2.size());
    double inv_sum = 0.0;
    for (std::size_t j = 0; j < prev_delta2.size(); ++j) {
        const double dev = chi == 0.0 ? 0.0 : (received_phis[j] - w_hat).squaredNorm();
        out.delta2[j] = (1.0 - chi) * prev_delta2[j] + chi * dev;
        out.beta[j] = 1.0 / std::max(out.delta2[j], kDelta2Floor);
        inv_sum += out.beta[j];
    }
    if (!(inv_sum > 0.0) || !std::isfinite(inv_sum)) {
        // Every deviation overflowed; nothing distinguishes the neighbors.
        std::fill(out.beta.begin(), out.beta.end(), 1.0 / static_cast<double>(out.beta.size()));
        return out;
    }
    for (double& b : out.beta) b /= inv_sum;
    return out;
}

void NetworkModel::validate() const {
    const std::size_t n = graph.size();
    if (h.size() == 0) throw InvalidArgument("true weight vector is empty");
    if (input_variance.size() != n) throw InvalidArgument("input variances must be given per node");
    for (double v : input_variance)
        if (!(v >= 0.0)) throw InvalidArgument("input variance must be >= 0");
    if (noise.before.size() != n || (noise.after && noise.after->size() != n)) {
        throw InvalidArgument("noise specs sized for a different network");
    }
    if (auto bad = validate_combination_matrix(adaptation, graph)) {
        throw InvalidArgument("adaptation matrix: " + bad->message);
    }
    if (auto bad = validate_combination_matrix(combination, graph)) {
        throw InvalidArgument("combination matrix: " + bad->message);
    }
}

std::vector<NodeState> initial_states(const NetworkModel& model, const AlgorithmSpec& spec) {
    std::vector<NodeState> states(model.size());
    for (NodeId k = 0; k < model.size(); ++k) {
        auto& s = states[k];
        s.w = Vector::Zero(model.filter_length());
        s.phi = s.w;
        const auto& hood = model.graph.neighborhood(k);
        s.delta2.assign(hood.size(), kInitialDelta2);
        s.beta_row.resize(hood.size());
        for (std::size_t j = 0; j < hood.size(); ++j) {
            s.beta_row[j] = spec.share_weights ? model.combination(hood[j], k) : (hood[j] == k ? 1.0 : 0.0);
        }
    }
    return states;
}

SharedSample draw_node_data(const NetworkModel& model, const Substreams& streams, std::size_t iteration, NodeId l) {
    auto rng = streams.stream(iteration, l, l, Channel::Data);
    std::normal_distribution<double> normal(0.0, 1.0);
    SharedSample s;
    s.source = l;
    s.self_link = true;
    s.x.resize(model.filter_length());
    const double sx = std::sqrt(model.input_variance[l]);
    for (Eigen::Index j = 0; j < s.x.size(); ++j) s.x[j] = sx * normal(rng);
    const double obs = model.noise.active(iteration).observation_variance(l);
    const double v = obs > 0.0 ? std::sqrt(obs) * normal(rng) : 0.0;
    s.y = model.h.dot(s.x) + v;
    return s;
}

void node_iteration(std::vector<NodeState>& states, const NetworkModel& model, const AlgorithmSpec& spec,
                    std::size_t iteration, const Substreams& streams) {
    const std::size_t n = model.size();
    if (states.size() != n) throw InvalidArgument("node_iteration: state count does not match the network");
    const LinkNoiseSpec& noise = model.noise.active(iteration);
    const double kernel2 = spec.kernel.at(iteration);

    std::vector<SharedSample> own(n);
    for (NodeId l = 0; l < n; ++l) own[l] = draw_node_data(model, streams, iteration, l);

    std::vector<LinkSample> received;
    for (NodeId k = 0; k < n; ++k) {
        received.clear();
        for (NodeId l : model.graph.neighborhood(k)) {
            const bool self = l == k;
            const double alpha = spec.share_data ? model.adaptation(l, k) : (self ? 1.0 : 0.0);
            if (alpha == 0.0 && !self) continue;
            LinkSample link;
            link.alpha = alpha;
            link.kernel2 = kernel2;
            if (self) {
                link.sample = own[k];
            } else {
                const ChannelSpecs& ch = noise.link(l, k);
                auto rx = streams.stream(iteration, l, k, Channel::InputX);
                auto ry = streams.stream(iteration, l, k, Channel::OutputY);
                link.sample.x = perturb_link(own[l].x, ch.x, false, rx);
                link.sample.y = perturb_link(own[l].y, ch.y, false, ry);
                link.sample.source = l;
                link.sample.self_link = false;
                link.tls_defined = ch.x.sigma_a2 > 0.0;
                if (link.tls_defined) link.gamma = gamma_lk(noise.observation_variance(l), ch.y.sigma_a2, ch.x.sigma_a2);
            }
            received.push_back(std::move(link));
        }
        states[k].phi = adapt_step(states[k], received, spec, spec.step_sizes[k]);
    }

    std::vector<Vector> next_w(n);
    std::vector<Vector> phis;
    std::vector<WeightedPhi> weighted;
    for (NodeId k = 0; k < n; ++k) {
        auto& s = states[k];
        if (!spec.share_weights) {
            next_w[k] = s.phi;
            continue;
        }
        const auto& hood = model.graph.neighborhood(k);
        phis.resize(hood.size());
        for (std::size_t j = 0; j < hood.size(); ++j) {
            const NodeId l = hood[j];
            if (!spec.adaptive_combination && s.beta_row[j] == 0.0) {
                phis[j] = states[l].phi;  // unused
                continue;
            }
            auto rng = streams.stream(iteration, l, k, Channel::Weight);
            phis[j] = perturb_link(states[l].phi, noise.link(l, k).phi, l == k, rng);
        }
        if (spec.adaptive_combination) {
            const Vector w_hat = local_one_step(s.w, own[k], spec.step_sizes[k], spec.epsilon);
            auto upd = adaptive_beta_update(s.delta2, phis, w_hat, spec.chi);
            s.delta2 = std::move(upd.delta2);
            s.beta_row = std::move(upd.beta);
        }
        weighted.resize(hood.size());
        for (std::size_t j = 0; j < hood.size(); ++j) weighted[j] = WeightedPhi{phis[j], s.beta_row[j]};
        next_w[k] = combine_step(s, weighted, true);
    }
    for (NodeId k = 0; k < n; ++k) states[k].w = std::move(next_w[k]);
}

}  // namespace difflab
