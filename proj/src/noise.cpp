#include "difflab/noise.hpp"

#include <string>

#include "difflab/errors.hpp"

namespace difflab {

void GmmSpec::validate() const {
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("GMM mixing probability c must lie in [0, 1]");
    if (!(sigma_a2 >= 0.0) || !std::isfinite(sigma_a2)) throw InvalidArgument("GMM sigma_a2 must be >= 0");
    if (!(sigma_b2 >= 0.0) || !std::isfinite(sigma_b2)) throw InvalidArgument("GMM sigma_b2 must be >= 0");
}

LinkNoiseSpec::LinkNoiseSpec(std::size_t n_nodes, ChannelSpecs uniform, std::vector<double> observation_variance)
    : uniform_(uniform), observation_(std::move(observation_variance)) {
    if (observation_.size() == 1 && n_nodes > 1) observation_.assign(n_nodes, observation_.front());
    if (observation_.size() != n_nodes) {
        throw InvalidArgument("observation variances given for " + std::to_string(observation_.size()) +
                              " nodes, expected " + std::to_string(n_nodes));
    }
    for (double v : observation_)
        if (!(v >= 0.0)) throw InvalidArgument("observation variance must be >= 0");
    uniform_.x.validate();
    uniform_.y.validate();
    uniform_.phi.validate();
}

const ChannelSpecs& LinkNoiseSpec::link(NodeId l, NodeId k) const {
    static const ChannelSpecs silent{};
    if (l == k) return silent;
    if (auto it = overrides_.find({l, k}); it != overrides_.end()) return it->second;
    return uniform_;
}

void LinkNoiseSpec::set_link(NodeId l, NodeId k, ChannelSpecs specs) {
    if (l >= size() || k >= size()) throw InvalidArgument("link endpoint out of range");
    specs.x.validate();
    specs.y.validate();
    specs.phi.validate();
    if (l == k) return;
    overrides_[{l, k}] = specs;
}

bool LinkNoiseSpec::all_gaussian() const {
    auto gaussian = [](const ChannelSpecs& s) { return s.x.is_gaussian() && s.y.is_gaussian() && s.phi.is_gaussian(); };
    if (!gaussian(uniform_)) return false;
    for (const auto& [key, specs] : overrides_)
        if (!gaussian(specs)) return false;
    return true;
}

double gamma_lk(double sigma_l2, double sigma_lk_y2, double sigma_lk_x2) {
    if (!(sigma_lk_x2 > 0.0)) {
        throw InvalidArgument("gamma_lk: input-noise variance must be positive (TLS ratio undefined)");
    }
    if (!(sigma_l2 >= 0.0) || !(sigma_lk_y2 >= 0.0)) throw InvalidArgument("gamma_lk: variances must be >= 0");
    return (sigma_l2 + sigma_lk_y2) / sigma_lk_x2;
}

}  // namespace difflab
