#include "difflab/theory.hpp"

#include <cmath>
#include <string>

#include "difflab/engine.hpp"
#include "difflab/errors.hpp"
#include "difflab/noise.hpp"

namespace difflab {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void require_neighbor(const TheoryInputs& in, NodeId l, NodeId k) {
    if (l >= in.size() || k >= in.size() || !in.graph.in_neighborhood(l, k)) {
        throw InvalidArgument("node " + std::to_string(l) + " is not in the neighborhood of node " + std::to_string(k));
    }
}

Matrix kron_identity(const Matrix& m, Eigen::Index L) {
    Matrix out = Matrix::Zero(m.rows() * L, m.cols() * L);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (m(i, j) != 0.0) out.block(i * L, j * L, L, L).diagonal().setConstant(m(i, j));
    return out;
}

}  // namespace

double to_db(double linear) {
    return linear > 0.0 ? 10.0 * std::log10(linear) : -std::numeric_limits<double>::infinity();
}

void TheoryInputs::validate() const {
    const std::size_t n = size();
    const Eigen::Index L = filter_length();
    if (L == 0) throw InvalidArgument("theory: empty weight vector");
    if (R.size() != n || sigma2_obs.size() != n || mu.size() != n) {
        throw InvalidArgument("theory: per-node inputs must have one entry per node");
    }
    for (const auto& r : R) {
        if (r.rows() != L || r.cols() != L) throw InvalidArgument("theory: input covariance has wrong shape");
        if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("theory: input covariance not symmetric");
    }
    for (const Matrix* m : {&sigma2_x, &sigma2_y, &sigma2_phi, &gamma, &zeta2}) {
        if (m->rows() != idx(n) || m->cols() != idx(n)) throw InvalidArgument("theory: link parameters must be N x N");
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!(sigma2_obs[k] >= 0.0)) throw InvalidArgument("theory: observation variance must be >= 0");
        if (!(mu[k] >= 0.0)) throw InvalidArgument("theory: step sizes must be >= 0");
    }
    if (auto bad = validate_combination_matrix(adaptation, graph)) throw InvalidArgument("theory: A " + bad->message);
    if (auto bad = validate_combination_matrix(combination, graph)) throw InvalidArgument("theory: C " + bad->message);
}

TheoryInputs theory_inputs(const NetworkModel& model, const AlgorithmSpec& spec, std::size_t iteration) {
    if (spec.kind != EstimatorKind::DMTC || spec.adaptive_combination) {
        throw InvalidArgument("theory covers DMTC with a fixed combination matrix only");
    }
    const std::size_t n = model.size();
    const Eigen::Index L = model.filter_length();
    const LinkNoiseSpec& noise = model.noise.active(iteration);
    TheoryInputs in{
        model.h,
        {},
        model.graph,
        spec.share_data ? model.adaptation : CombinationMatrix::identity(n, MatrixRole::Adaptation),
        spec.share_weights ? model.combination : CombinationMatrix::identity(n),
        noise.observation_variances(),
        spec.step_sizes,
        Matrix::Zero(idx(n), idx(n)),
        Matrix::Zero(idx(n), idx(n)),
        Matrix::Zero(idx(n), idx(n)),
        Matrix::Zero(idx(n), idx(n)),
        Matrix::Constant(idx(n), idx(n), spec.kernel.after),
    };
    for (std::size_t k = 0; k < n; ++k) in.R.push_back(model.input_variance[k] * Matrix::Identity(L, L));
    for (NodeId k = 0; k < n; ++k) {
        for (NodeId l : model.graph.neighborhood(k)) {
            if (l == k) continue;
            const ChannelSpecs& ch = noise.link(l, k);
            in.sigma2_x(idx(l), idx(k)) = ch.x.sigma_a2;
            in.sigma2_y(idx(l), idx(k)) = ch.y.sigma_a2;
            in.sigma2_phi(idx(l), idx(k)) = ch.phi.sigma_a2;
            in.gamma(idx(l), idx(k)) = ch.x.sigma_a2 > 0.0
                                           ? gamma_lk(noise.observation_variance(l), ch.y.sigma_a2, ch.x.sigma_a2)
                                           : std::numeric_limits<double>::quiet_NaN();
        }
    }
    in.validate();
    return in;
}

Matrix hessian_at_optimum(const TheoryInputs& in, NodeId l, NodeId k) {
    require_neighbor(in, l, k);
    const Matrix& R = in.R.at(l);
    const double gamma = in.gamma(idx(l), idx(k));
    if (l == k || std::isnan(gamma)) return -R;
    const double sx = in.sigma2_x(idx(l), idx(k));
    const double z2 = in.zeta2(idx(l), idx(k));
    const double factor = std::pow(z2 / (sx + z2), 1.5) / (in.h.squaredNorm() + gamma);
    return -factor * R;
}

Matrix gradient_covariance(const TheoryInputs& in, NodeId l, NodeId k) {
    require_neighbor(in, l, k);
    const Matrix& R = in.R.at(l);
    const double gamma = in.gamma(idx(l), idx(k));
    if (l == k) return in.sigma2_obs.at(l) * R;
    if (std::isnan(gamma)) return (in.sigma2_obs.at(l) + in.sigma2_y(idx(l), idx(k))) * R;
    const double sx = in.sigma2_x(idx(l), idx(k));
    const double z2 = in.zeta2(idx(l), idx(k));
    const double d = in.h.squaredNorm() + gamma;
    const Eigen::Index L = in.filter_length();
    const double pre = sx / (d * d) * std::pow(z2 / (2.0 * sx + z2), 1.5);
    return pre * (d * (R + sx * Matrix::Identity(L, L)) - sx * in.h * in.h.transpose());
}

Matrix summed_hessian(const TheoryInputs& in, NodeId k) {
    const Eigen::Index L = in.filter_length();
    Matrix sum = Matrix::Zero(L, L);
    for (NodeId l : in.graph.neighborhood(k)) {
        const double a = in.adaptation(l, k);
        if (a != 0.0) sum += a * hessian_at_optimum(in, l, k);
    }
    return sum;
}

MeanRecursion mean_recursion_matrix(const TheoryInputs& in) {
    in.validate();
    const std::size_t n = in.size();
    const Eigen::Index L = in.filter_length();
    const Eigen::Index NL = idx(n) * L;
    Matrix inner = Matrix::Identity(NL, NL);
    for (NodeId p = 0; p < n; ++p) inner.block(idx(p) * L, idx(p) * L, L, L) += in.mu[p] * summed_hessian(in, p);
    Matrix B = kron_identity(in.combination.matrix(), L).transpose() * inner;
    SpectralRadius rho = spectral_radius(B);
    return MeanRecursion{std::move(B), rho};
}

double stepsize_upper_bound(const TheoryInputs& in, NodeId k) {
    if (k >= in.size()) throw InvalidArgument("stepsize_upper_bound: node out of range");
    const Matrix sum = summed_hessian(in, k);
    const double rho = spectral_radius(sum).value;
    if (!(rho > 0.0)) throw InvalidArgument("summed Hessian of node " + std::to_string(k) + " vanishes; step size unbounded");
    return 2.0 / rho;
}

NoiseCovariances steady_state_noise(const TheoryInputs& in) {
    const std::size_t n = in.size();
    const Eigen::Index L = in.filter_length();
    const Eigen::Index NL = idx(n) * L;
    Matrix V = Matrix::Zero(NL, NL);
    Matrix grad_cov = Matrix::Zero(NL, NL);
    for (NodeId p = 0; p < n; ++p) {
        double phi_noise = 0.0;
        for (NodeId l : in.graph.neighborhood(p)) {
            const double a = in.adaptation(l, p);
            if (a != 0.0) grad_cov.block(idx(p) * L, idx(p) * L, L, L) += a * a * gradient_covariance(in, l, p);
            if (l != p) {
                const double b = in.combination(l, p);
                phi_noise += b * b * in.sigma2_phi(idx(l), idx(p));
            }
        }
        V.block(idx(p) * L, idx(p) * L, L, L).diagonal().setConstant(phi_noise);
    }
    const Matrix C = kron_identity(in.combination.matrix(), L);
    DenseVector mu_diag(NL);
    for (NodeId p = 0; p < n; ++p) mu_diag.segment(idx(p) * L, L).setConstant(in.mu[p]);
    const Matrix scaled = mu_diag.asDiagonal() * grad_cov * mu_diag.asDiagonal();
    Matrix R = C.transpose() * scaled * C;
    return NoiseCovariances{std::move(V), std::move(R)};
}

MsdPrediction steady_state_msd(const TheoryInputs& in) {
    const MeanRecursion rec = mean_recursion_matrix(in);
    if (!(rec.rho.value < 1.0)) {
        throw InstabilityError("mean recursion is unstable: spectral radius " + std::to_string(rec.rho.value));
    }
    const NoiseCovariances noise = steady_state_noise(in);
    const Matrix drive = noise.V + noise.R;
    const Eigen::Index NL = rec.B.rows();

    MsdPrediction out;
    if (drive.cwiseAbs().maxCoeff() == 0.0) {
        out.converged = true;
        return out;
    }
    // S = sum_j (B^T)^j B^j, accumulated term by term.
    Matrix S = Matrix::Identity(NL, NL);
    Matrix term = Matrix::Identity(NL, NL);
    for (std::size_t it = 1; it <= kLyapunovIterationCap; ++it) {
        term = rec.B.transpose() * term * rec.B;
        S += term;
        if (term.norm() < kLyapunovTolerance) {
            out.converged = true;
            out.iterations_used = it;
            break;
        }
    }
    if (!out.converged) {
        throw NumericalFailure("steady-state series did not settle within " + std::to_string(kLyapunovIterationCap) +
                               " iterations");
    }
    out.msd_linear = drive.cwiseProduct(S).sum() / static_cast<double>(in.size());
    out.msd_db = to_db(out.msd_linear);
    return out;
}

TradeoffReport combination_noise_tradeoff(const TheoryInputs& in) {
    in.validate();
    const NoiseCovariances noise = steady_state_noise(in);
    const Eigen::Index L = in.filter_length();
    TradeoffReport out;
    for (NodeId p = 0; p < in.size(); ++p) {
        const double v = noise.V.block(idx(p) * L, idx(p) * L, L, L).trace();
        const double r = noise.R.block(idx(p) * L, idx(p) * L, L, L).trace();
        out.combination_part.push_back(v);
        out.adaptation_part.push_back(r);
        out.per_node.push_back(v + r);
        out.total += v + r;
    }
    return out;
}

}  // namespace difflab
