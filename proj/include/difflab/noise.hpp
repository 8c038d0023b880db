#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "difflab/types.hpp"

namespace difflab {

// Two-component zero-mean Gaussian mixture:
//   (1 - c) N(0, sigma_a2) + c N(0, sigma_b2).
// sigma_a2 is the outlier-free level; sigma_b2 models impulses.
struct GmmSpec {
    double c = 0.0;
    double sigma_a2 = 0.0;
    double sigma_b2 = 0.0;

    static GmmSpec gaussian(double variance) { return GmmSpec{0.0, variance, 0.0}; }

    void validate() const;
    double total_variance() const noexcept { return (1.0 - c) * sigma_a2 + c * sigma_b2; }
    bool silent() const noexcept { return sigma_a2 == 0.0 && (c == 0.0 || sigma_b2 == 0.0); }
    bool is_gaussian() const noexcept { return c == 0.0 || sigma_b2 == sigma_a2; }

    friend bool operator==(const GmmSpec&, const GmmSpec&) = default;
};

// Noise on the three payloads of one directed link.
struct ChannelSpecs {
    GmmSpec x;    // regressor, isotropic per component
    GmmSpec y;    // scalar output
    GmmSpec phi;  // intermediate estimate, isotropic per component

    friend bool operator==(const ChannelSpecs&, const ChannelSpecs&) = default;
};

// Per-directed-link channel specs plus per-node observation noise. Self
// links are silent whatever was configured.
class LinkNoiseSpec {
public:
    LinkNoiseSpec() = default;
    LinkNoiseSpec(std::size_t n_nodes, ChannelSpecs uniform, std::vector<double> observation_variance);

    std::size_t size() const noexcept { return observation_.size(); }
    const ChannelSpecs& link(NodeId l, NodeId k) const;
    void set_link(NodeId l, NodeId k, ChannelSpecs specs);
    double observation_variance(NodeId k) const { return observation_.at(k); }
    const std::vector<double>& observation_variances() const noexcept { return observation_; }
    bool all_gaussian() const;

private:
    ChannelSpecs uniform_;
    std::map<std::pair<NodeId, NodeId>, ChannelSpecs> overrides_;
    std::vector<double> observation_;
};

template <std::uniform_random_bit_generator Rng>
double sample_gmm(const GmmSpec& spec, Rng& rng, std::normal_distribution<double>& normal) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool outlier = spec.c > 0.0 && unit(rng) < spec.c;
    const double variance = outlier ? spec.sigma_b2 : spec.sigma_a2;
    const double z = normal(rng);
    return variance > 0.0 ? std::sqrt(variance) * z : 0.0;
}

template <std::uniform_random_bit_generator Rng>
double sample_gmm(const GmmSpec& spec, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    return sample_gmm(spec, rng, normal);
}

// payload + noise; a self link (or a silent channel) returns the payload
// untouched without consuming randomness.
template <std::uniform_random_bit_generator Rng>
Vector perturb_link(const Vector& payload, const GmmSpec& channel, bool self_link, Rng& rng) {
    if (self_link || channel.silent()) return payload;
    Vector out = payload;
    std::normal_distribution<double> normal(0.0, 1.0);  // shared so both polar draws get used
    for (Eigen::Index j = 0; j < out.size(); ++j) out[j] += sample_gmm(channel, rng, normal);
    return out;
}

template <std::uniform_random_bit_generator Rng>
double perturb_link(double payload, const GmmSpec& channel, bool self_link, Rng& rng) {
    if (self_link || channel.silent()) return payload;
    return payload + sample_gmm(channel, rng);
}

// TLS normalization (sigma_l2 + sigma_lk_y2) / sigma_lk_x2, built from
// outlier-free variances. Throws InvalidArgument when sigma_lk_x2 == 0.
double gamma_lk(double sigma_l2, double sigma_lk_y2, double sigma_lk_x2);

}  // namespace difflab

namespace difflab {

// Link noise that may change once during a run; the later spec applies from
// switch_iteration onward (inclusive).
struct NoiseSchedule {
    LinkNoiseSpec before;
    std::optional<LinkNoiseSpec> after;
    std::size_t switch_iteration = 0;

    const LinkNoiseSpec& active(std::size_t iteration) const {
        return after && iteration >= switch_iteration ? *after : before;
    }
    const LinkNoiseSpec& final_phase() const { return after ? *after : before; }
};

}  // namespace difflab
