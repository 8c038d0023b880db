#include <doctest.h>

#include <cmath>
#include <random>

#include "difflab/engine.hpp"
#include "difflab/errors.hpp"

using namespace difflab;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

SharedSample sample(Vector x, double y, bool self = true) {
    SharedSample s;
    s.x = std::move(x);
    s.y = y;
    s.self_link = self;
    return s;
}

double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

template <class F>
Vector central_difference(F f, const Vector& w, double step) {
    Vector g(w.size());
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        Vector p = w, m = w;
        p[j] += step;
        m[j] -= step;
        g[j] = (f(p) - f(m)) / (2.0 * step);
    }
    return g;
}

struct RandomPoint {
    Vector w;
    SharedSample s;
    double gamma;
};

RandomPoint random_point(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    RandomPoint p{Vector(4), sample(Vector(4), 0.0, false), u(rng)};
    for (int j = 0; j < 4; ++j) {
        p.w[j] = n(rng);
        p.s.x[j] = n(rng);
    }
    p.s.y = p.w.dot(p.s.x) + n(rng);
    return p;
}

AlgorithmSpec spec_for(EstimatorKind kind, std::size_t n, double mu) {
    AlgorithmSpec s;
    s.kind = kind;
    s.step_sizes.assign(n, mu);
    if (kind == EstimatorKind::NonCoopLMS) s.share_data = s.share_weights = false;
    return s;
}

NetworkModel quiet_model(const NetworkGraph& g, const Vector& h, double obs, ChannelSpecs ch = {}) {
    const auto c = metropolis_weights(g);
    return NetworkModel{g, c.with_role(MatrixRole::Adaptation), c, h, std::vector<double>(g.size(), 1.0),
                        NoiseSchedule{LinkNoiseSpec(g.size(), ch, {obs}), std::nullopt, 0}};
}

}  // namespace

TEST_CASE("lms gradient") {
    CHECK((lms_gradient(Vector::Zero(4), sample(vec({1, 0, 0, 0}), 1.0)) - vec({1, 0, 0, 0})).norm() == 0.0);
    const Vector w = vec({0.4, 0.7, -0.3, 0.5});
    const Vector x = vec({0.3, -1.2, 2.0, 0.1});
    CHECK(lms_gradient(w, sample(x, w.dot(x))).norm() == 0.0);
    const Vector g = lms_gradient(w, sample(vec({1, 1, 1, 1}), 2.0));
    CHECK(residual(w, sample(vec({1, 1, 1, 1}), 2.0)) == doctest::Approx(0.7));
    for (int j = 0; j < 4; ++j) CHECK(g[j] == doctest::Approx(0.7));
}

TEST_CASE("mcc gradient") {
    const Vector w = vec({0.4, 0.7, -0.3, 0.5});
    const Vector x = vec({1, 1, 1, 1});
    CHECK(mcc_gradient(w, sample(x, w.dot(x)), 1.0).norm() == 0.0);
    const auto s = sample(x, 2.0);
    CHECK(rel_err(mcc_gradient(w, s, 1e12), lms_gradient(w, s)) < 1e-9);
    const Vector out = mcc_gradient(Vector::Zero(4), sample(vec({1, 0, 0, 0}), 10.0), 1.0);
    CHECK(out.norm() == doctest::Approx(10.0 * std::exp(-50.0)).epsilon(1e-12));
    CHECK(out.norm() < 2e-21);
    CHECK_THROWS_AS(mcc_gradient(w, s, 0.0), InvalidArgument);
}

TEST_CASE("mtc cost") {
    const Vector w = vec({1, 0, 0, 0});
    CHECK(mtc_cost(w, sample(vec({1, 0, 0, 0}), 1.0), 1.0, 1.0) == 1.0);
    CHECK(mtc_cost(w, sample(vec({1, 0, 0, 0}), 2.0), 1.0, 1.0) == doctest::Approx(std::exp(-0.25)));
    CHECK(mtc_cost(w, sample(vec({1, 0, 0, 0}), 2.0), 1.0, 1.0) == doctest::Approx(0.7788).epsilon(1e-4));
    CHECK_THROWS_AS(mtc_cost(Vector::Zero(4), sample(vec({1, 0, 0, 0}), 2.0), 1.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(mtc_gradient(Vector::Zero(4), sample(vec({1, 0, 0, 0}), 2.0), 1.0, 0.0), InvalidArgument);
    // Strictly positive as long as exp() does not underflow; beyond that it
    // is 0, never negative.
    std::mt19937_64 rng(1);
    for (int i = 0; i < 500; ++i) {
        auto p = random_point(rng);
        p.s.y *= 1.0 + 5.0 * (i % 3);
        const double zeta2 = 0.05 + i * 0.01;
        const double e = residual(p.w, p.s);
        const double c = mtc_cost(p.w, p.s, zeta2, p.gamma);
        if (e * e / (2.0 * zeta2 * (p.w.squaredNorm() + p.gamma)) < 700.0) CHECK(c > 0.0);
        CHECK(c <= 1.0);
        p.s.y *= 1e6;
        const double far = mtc_cost(p.w, p.s, 0.05, p.gamma);
        CHECK(far >= 0.0);
        CHECK(far <= 1.0);
    }
}

TEST_CASE("mtc gradient: zero residual and finite differences") {
    const Vector w = vec({0.4, 0.7, -0.3, 0.5});
    const Vector x = vec({0.3, -1.2, 2.0, 0.1});
    CHECK(mtc_gradient(w, sample(x, w.dot(x)), 0.2, 3.5).norm() == 0.0);

    std::mt19937_64 rng(7);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_point(rng);
        for (double zeta2 : {0.2, 1.0, 5.0}) {
            const auto cost = [&](const Vector& v) { return mtc_cost(v, p.s, zeta2, p.gamma); };
            CHECK(rel_err(mtc_gradient(p.w, p.s, zeta2, p.gamma), central_difference(cost, p.w, 1e-6)) < 1e-5);
        }
    }
}

TEST_CASE("gd-tls gradient: finite differences of the TLS ratio") {
    const Vector w = vec({0.4, 0.7, -0.3, 0.5});
    const Vector x = vec({0.3, -1.2, 2.0, 0.1});
    CHECK(gdtls_gradient(w, sample(x, w.dot(x)), 3.5).norm() == 0.0);
    std::mt19937_64 rng(8);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_point(rng);
        const auto ratio = [&](const Vector& v) {
            const double e = residual(v, p.s);
            return -0.5 * e * e / (v.squaredNorm() + p.gamma);
        };
        const Vector fd = central_difference(ratio, p.w, 1e-6);
        CHECK(rel_err(gdtls_gradient(p.w, p.s, p.gamma), fd) < 1e-5);
        CHECK(rel_err(1e8 * mtc_gradient(p.w, p.s, 1e8, p.gamma), fd) < 1e-4);
        CHECK(rel_err(1e10 * mtc_gradient(p.w, p.s, 1e10, p.gamma), gdtls_gradient(p.w, p.s, p.gamma)) < 1e-6);
    }
}

TEST_CASE("mtc gradient stays bounded as the residual grows") {
    const Vector w = vec({0.4, 0.7, -0.3, 0.5});
    const Vector x = vec({1.0, -0.5, 0.25, 2.0});
    double peak = 0.0, peak_e = 0.0, last = 0.0;
    for (double loge = -3.0; loge <= 6.0; loge += 0.05) {
        const double e = std::pow(10.0, loge);
        const double g = mtc_gradient(w, sample(x, w.dot(x) + e), 0.2, 3.5).norm();
        REQUIRE(std::isfinite(g));
        if (g > peak) {
            peak = g;
            peak_e = e;
        }
        last = g;
    }
    CHECK(peak_e > 1e-2);
    CHECK(peak_e < 1e2);
    CHECK(last < 1e-12 * peak);
}

TEST_CASE("link gradient dispatch") {
    const Vector w = vec({0.1, 0.2, 0.3, 0.4});
    LinkSample cross;
    cross.sample = sample(vec({1.0, 0.5, -0.5, 2.0}), 3.0, false);
    cross.gamma = 3.5;
    cross.kernel2 = 0.2;
    const Vector lms = lms_gradient(w, cross.sample);
    CHECK(rel_err(link_gradient(EstimatorKind::DLMS, w, cross), lms) == 0.0);
    CHECK(rel_err(link_gradient(EstimatorKind::DMCC, w, cross), mcc_gradient(w, cross.sample, 0.2)) == 0.0);
    CHECK(rel_err(link_gradient(EstimatorKind::DGDTLS, w, cross), gdtls_gradient(w, cross.sample, 3.5)) == 0.0);
    CHECK(rel_err(link_gradient(EstimatorKind::DMTC, w, cross),
                  0.2 * mtc_gradient(w, cross.sample, 0.2, 3.5)) < 1e-15);
    cross.tls_defined = false;
    CHECK(rel_err(link_gradient(EstimatorKind::DMTC, w, cross), lms) == 0.0);
    LinkSample self = cross;
    self.sample.self_link = true;
    self.tls_defined = true;
    CHECK(rel_err(link_gradient(EstimatorKind::DMTC, w, self), lms) == 0.0);
}

TEST_CASE("adapt step") {
    NodeState st;
    st.w = vec({0.4, 0.7, -0.3, 0.5});
    const Vector x = vec({1, 1, 1, 1});

    SUBCASE("zero residuals leave w unchanged") {
        std::vector<LinkSample> rx(2);
        rx[0].sample = sample(x, st.w.dot(x));
        rx[0].alpha = 0.5;
        rx[1].sample = sample(vec({0, 1, 0, 2}), st.w.dot(vec({0, 1, 0, 2})), false);
        rx[1].alpha = 0.5;
        rx[1].gamma = 3.5;
        rx[1].kernel2 = 0.2;
        CHECK((adapt_step(st, rx, spec_for(EstimatorKind::DMTC, 1, 0.1), 0.1) - st.w).norm() == 0.0);
    }
    SUBCASE("no data sharing is one LMS step") {
        std::vector<LinkSample> rx(1);
        rx[0].sample = sample(x, 2.0);
        rx[0].alpha = 1.0;
        const Vector phi = adapt_step(st, rx, spec_for(EstimatorKind::NonCoopLMS, 1, 0.1), 0.1);
        CHECK(rel_err(phi, st.w + 0.1 * 0.7 * x) < 1e-15);
    }
    SUBCASE("weight checks") {
        std::vector<LinkSample> rx(1);
        rx[0].sample = sample(x, 2.0);
        rx[0].alpha = 0.9;
        CHECK_THROWS_AS(adapt_step(st, rx, spec_for(EstimatorKind::DLMS, 1, 0.1), 0.1), InvalidArgument);
        rx[0].alpha = 1.0;
        rx[0].sample.self_link = false;
        CHECK_THROWS_AS(adapt_step(st, rx, spec_for(EstimatorKind::DLMS, 1, 0.1), 0.1), InvalidArgument);
    }
}

TEST_CASE("adapt step: two-neighbour DMTC by hand, L = 2") {
    // w = (0.5, -0.25). Self sample x = (1, 2), y = 0.5: e = 0.5.
    // Cross sample x = (2, 1), y = 1.5, gamma = 3, zeta2 = 0.5:
    //   e = 0.75, D = 0.3125 + 3 = 3.3125, G = exp(-0.5625 / 3.3125)
    //   zeta2 * grad = G * (D * e * x + e^2 * w) / D^2
    NodeState st;
    st.w = vec({0.5, -0.25});
    std::vector<LinkSample> rx(2);
    rx[0].sample = sample(vec({1, 2}), 0.5);
    rx[0].alpha = 0.25;
    rx[1].sample = sample(vec({2, 1}), 1.5, false);
    rx[1].alpha = 0.75;
    rx[1].gamma = 3.0;
    rx[1].kernel2 = 0.5;
    const double mu = 0.2;

    const double D = 0.5 * 0.5 + 0.25 * 0.25 + 3.0;
    const double e2 = 0.75;
    const double G = std::exp(-e2 * e2 / (2.0 * 0.5 * D));
    const double g0 = G * (D * e2 * 2.0 + e2 * e2 * 0.5) / (D * D);
    const double g1 = G * (D * e2 * 1.0 + e2 * e2 * -0.25) / (D * D);
    const double phi0 = 0.5 + mu * (0.25 * 0.5 * 1.0 + 0.75 * g0);
    const double phi1 = -0.25 + mu * (0.25 * 0.5 * 2.0 + 0.75 * g1);

    const Vector phi = adapt_step(st, rx, spec_for(EstimatorKind::DMTC, 1, mu), mu);
    CHECK(phi[0] == doctest::Approx(phi0).epsilon(1e-14));
    CHECK(phi[1] == doctest::Approx(phi1).epsilon(1e-14));
}

TEST_CASE("combine step") {
    NodeState st;
    st.w = vec({9, 9});
    st.phi = vec({3, 4});
    std::vector<WeightedPhi> rx{{vec({1, 0}), 0.25}, {vec({0, 1}), 0.75}};
    const Vector w = combine_step(st, rx);
    CHECK(w[0] == 0.25);
    CHECK(w[1] == 0.75);
    CHECK((combine_step(st, rx, false) - st.phi).norm() == 0.0);

    std::vector<WeightedPhi> self_only{{vec({3, 4}), 1.0}, {vec({7, 7}), 0.0}};
    CHECK((combine_step(st, self_only) - st.phi).norm() == 0.0);

    std::vector<WeightedPhi> same{{vec({2, -1}), 0.2}, {vec({2, -1}), 0.3}, {vec({2, -1}), 0.5}};
    CHECK((combine_step(st, same) - vec({2, -1})).norm() < 1e-15);

    std::vector<WeightedPhi> bad{{vec({1, 0}), 0.5}, {vec({0, 1}), 0.4}};
    CHECK_THROWS_AS(combine_step(st, bad), InvalidArgument);
    bad[1].beta = -0.5;
    bad[0].beta = 1.5;
    CHECK_THROWS_AS(combine_step(st, bad), InvalidArgument);
}

TEST_CASE("combine step lies in the convex hull of its inputs") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    NodeState st;
    for (int trial = 0; trial < 300; ++trial) {
        const int m = 1 + trial % 6;
        std::vector<WeightedPhi> rx(m);
        double total = 0.0;
        for (auto& r : rx) {
            r.phi = Vector(3);
            for (int j = 0; j < 3; ++j) r.phi[j] = n(rng);
            r.beta = u(rng);
            total += r.beta;
        }
        for (auto& r : rx) r.beta /= total;
        const Vector w = combine_step(st, rx);
        for (int j = 0; j < 3; ++j) {
            double lo = rx[0].phi[j], hi = rx[0].phi[j];
            for (const auto& r : rx) {
                lo = std::min(lo, r.phi[j]);
                hi = std::max(hi, r.phi[j]);
            }
            CHECK(w[j] >= lo - 1e-12);
            CHECK(w[j] <= hi + 1e-12);
        }
    }
}

TEST_CASE("local one-step approximation") {
    CHECK((local_one_step(vec({1, 2}), sample(vec({1, 1}), 3.0), 0.1, 1e-6) - vec({1, 2})).norm() == 0.0);
    const Vector w_hat = local_one_step(Vector::Zero(2), sample(vec({2, 0}), 2.0), 0.1, 1e-6);
    CHECK(w_hat[0] == doctest::Approx(0.025).epsilon(1e-6));
    CHECK(w_hat[1] == 0.0);
    // unit-norm gradient: step magnitude is mu
    const Vector unit = local_one_step(Vector::Zero(2), sample(vec({1, 0}), 1.0), 0.3, 1e-15);
    CHECK(unit.norm() == doctest::Approx(0.3).epsilon(1e-12));
    CHECK_THROWS_AS(local_one_step(Vector::Zero(2), sample(vec({1, 0}), 1.0), 0.3, 0.0), InvalidArgument);
}

TEST_CASE("adaptive beta update") {
    const Vector w_hat = vec({0, 0});
    SUBCASE("equal deviations give uniform weights") {
        std::vector<Vector> phis{vec({1, 0}), vec({0, 1}), vec({-1, 0})};
        const auto u = adaptive_beta_update(std::vector<double>{1, 1, 1}, phis, w_hat, 0.3);
        for (double b : u.beta) CHECK(b == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("an outlier gets almost no weight") {
        std::vector<Vector> phis{vec({1, 0}), vec({1000, 0}), vec({0, 1})};
        const auto u = adaptive_beta_update(std::vector<double>{5, 5, 5}, phis, w_hat, 1.0);
        CHECK(u.delta2[1] == doctest::Approx(1e6));
        CHECK(u.beta[1] == doctest::Approx(1e-6 / (2.0 + 1e-6)).epsilon(1e-12));
        CHECK(u.beta[1] < 1e-6);
    }
    SUBCASE("chi = 0 freezes everything") {
        std::vector<Vector> phis{vec({1, 0}), vec({3, 0})};
        const std::vector<double> prev{0.5, 2.0};
        const auto u = adaptive_beta_update(prev, phis, w_hat, 0.0);
        CHECK(u.delta2 == prev);
        CHECK(u.beta[0] == doctest::Approx(0.8));
        CHECK(u.beta[1] == doctest::Approx(0.2));
    }
    SUBCASE("exact match is floored, not a division error") {
        std::vector<Vector> phis{vec({0, 0}), vec({1, 0})};
        const auto u = adaptive_beta_update(std::vector<double>{1, 1}, phis, w_hat, 1.0);
        CHECK(std::isfinite(u.beta[0]));
        CHECK(u.beta[0] > 0.999999);
    }
    SUBCASE("weights stay a convex combination") {
        std::mt19937_64 rng(9);
        std::lognormal_distribution<double> ln(0.0, 4.0);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int trial = 0; trial < 2000; ++trial) {
            const int m = 2 + trial % 7;
            std::vector<double> prev(m);
            std::vector<Vector> phis(m, Vector(2));
            for (int j = 0; j < m; ++j) {
                prev[j] = ln(rng);
                phis[j] << ln(rng) * n(rng), n(rng);
            }
            const auto u = adaptive_beta_update(prev, phis, w_hat, 0.05);
            double s = 0.0;
            for (double b : u.beta) {
                CHECK(b >= 0.0);
                CHECK(b <= 1.0);
                s += b;
            }
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("initial states") {
    const auto g = path_graph(3);
    const auto model = quiet_model(g, vec({0.4, 0.7}), 0.1);
    auto spec = spec_for(EstimatorKind::DMTC, 3, 0.1);
    auto states = initial_states(model, spec);
    REQUIRE(states.size() == 3);
    CHECK(states[1].w.norm() == 0.0);
    CHECK(states[1].delta2 == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(states[1].beta_row == std::vector<double>{0.5, 0.0, 0.5});
    spec.share_weights = false;
    CHECK(initial_states(model, spec)[1].beta_row == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("noiseless DLMS converges to h") {
    const auto g = generate_random_graph(10, 3.0, 4);
    const Vector h = vec({0.4, 0.7, -0.3, 0.5});
    const auto model = quiet_model(g, h, 0.0);
    const auto spec = spec_for(EstimatorKind::DLMS, g.size(), 0.05);
    auto states = initial_states(model, spec);
    const Substreams streams(5, 0);
    for (std::size_t i = 0; i < 5000; ++i) node_iteration(states, model, spec, i, streams);
    double worst = 0.0;
    for (const auto& s : states) worst = std::max(worst, (s.w - h).norm());
    CHECK(worst < 1e-6);
}

TEST_CASE("no sharing reproduces independent LMS filters") {
    const auto g = generate_random_graph(6, 2.0, 2);
    const Vector h = vec({0.4, 0.7, -0.3, 0.5});
    const ChannelSpecs ch{GmmSpec::gaussian(0.04), GmmSpec::gaussian(0.04), GmmSpec{0.01, 0.04, 10}};
    const auto model = quiet_model(g, h, 0.1, ch);
    auto spec = spec_for(EstimatorKind::DLMS, g.size(), 0.05);
    spec.share_data = spec.share_weights = false;
    auto states = initial_states(model, spec);
    const Substreams streams(17, 3);
    std::vector<Vector> lms(g.size(), Vector::Zero(4));
    for (std::size_t i = 0; i < 300; ++i) {
        node_iteration(states, model, spec, i, streams);
        for (NodeId k = 0; k < g.size(); ++k) {
            const SharedSample s = draw_node_data(model, streams, i, k);
            lms[k] = lms[k] + 0.05 * ((s.y - lms[k].dot(s.x)) * s.x);
        }
    }
    for (NodeId k = 0; k < g.size(); ++k) CHECK((states[k].w - lms[k]).norm() == 0.0);
}

TEST_CASE("one network iteration by hand: two nodes, L = 2") {
    // Noise-free links, so only the nodes' own data is random; it is read
    // back from the same substreams and the update written out in scalars.
    const NetworkGraph g(2, {{0, 1}});
    const Vector h = vec({0.6, -0.2});
    auto model = quiet_model(g, h, 0.1);
    model.adaptation = CombinationMatrix(Matrix::Constant(2, 2, 0.5), MatrixRole::Adaptation);
    model.combination = CombinationMatrix(Matrix::Constant(2, 2, 0.5));
    auto spec = spec_for(EstimatorKind::DLMS, 2, 0.3);
    auto states = initial_states(model, spec);
    states[0].w = vec({0.1, 0.2});
    states[1].w = vec({-0.3, 0.4});
    const Substreams streams(1, 0);
    const auto s0 = draw_node_data(model, streams, 0, 0);
    const auto s1 = draw_node_data(model, streams, 0, 1);

    double phi[2][2];
    const double w[2][2] = {{0.1, 0.2}, {-0.3, 0.4}};
    const SharedSample* smp[2] = {&s0, &s1};
    for (int k = 0; k < 2; ++k) {
        for (int j = 0; j < 2; ++j) phi[k][j] = w[k][j];
        for (int l = 0; l < 2; ++l) {
            const double e = smp[l]->y - (w[k][0] * smp[l]->x[0] + w[k][1] * smp[l]->x[1]);
            for (int j = 0; j < 2; ++j) phi[k][j] += 0.3 * 0.5 * e * smp[l]->x[j];
        }
    }
    node_iteration(states, model, spec, 0, streams);
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j) CHECK(states[k].w[j] == doctest::Approx(0.5 * (phi[0][j] + phi[1][j])).epsilon(1e-14));
}

TEST_CASE("adaptive rows stay stochastic and runs are deterministic") {
    const auto g = generate_random_graph(8, 3.0, 11);
    const Vector h = vec({0.4, 0.7, -0.3, 0.5});
    const ChannelSpecs ch{GmmSpec{0.01, 0.04, 10}, GmmSpec{0.01, 0.04, 10}, GmmSpec{0.01, 0.04, 10}};
    const auto model = quiet_model(g, h, 0.1, ch);
    auto spec = spec_for(EstimatorKind::DMTC, g.size(), 0.2);
    spec.adaptive_combination = true;
    spec.kernel = KernelSchedule{1e4, 0.2, 100};
    auto a = initial_states(model, spec);
    auto b = a;
    const Substreams streams(3, 1);
    for (std::size_t i = 0; i < 400; ++i) {
        node_iteration(a, model, spec, i, streams);
        node_iteration(b, model, spec, i, streams);
        for (const auto& s : a) {
            double sum = 0.0;
            for (double beta : s.beta_row) {
                REQUIRE(beta >= 0.0);
                sum += beta;
            }
            REQUIRE(std::abs(sum - 1.0) < 1e-12);
        }
    }
    for (NodeId k = 0; k < g.size(); ++k) CHECK((a[k].w - b[k].w).norm() == 0.0);
}
