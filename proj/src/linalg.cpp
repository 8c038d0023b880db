#include "difflab/linalg.hpp"

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "difflab/errors.hpp"

namespace difflab {

std::string_view to_string(SpectralMethod method) {
    return method == SpectralMethod::PowerIteration ? "power-iteration" : "dense-eigensolver";
}

namespace {

DenseVector start_vector(Eigen::Index n) {
    DenseVector v(n);
    for (Eigen::Index j = 0; j < n; ++j) v[j] = 1.0 + 0.37 * std::sin(static_cast<double>(j) + 1.0);
    return v.normalized();
}

std::optional<SpectralRadius> power_symmetric(const Matrix& m, double tol, std::size_t cap) {
    DenseVector v = start_vector(m.rows());
    double prev = -1.0;
    for (std::size_t it = 1; it <= cap; ++it) {
        DenseVector u = m * v;
        const double norm = u.norm();
        if (norm == 0.0) return SpectralRadius{0.0, it, SpectralMethod::PowerIteration};
        // ||Mv|| of the unit iterate is the square root of the Rayleigh
        // quotient of M^2, so it is exact when +/- eigenvalues tie.
        v = u / norm;
        if (prev >= 0.0 && std::abs(norm - prev) <= tol * norm) {
            return SpectralRadius{norm, it, SpectralMethod::PowerIteration};
        }
        prev = norm;
    }
    return std::nullopt;
}

std::optional<SpectralRadius> power_general(const Matrix& m, double tol, std::size_t cap) {
    DenseVector v = start_vector(m.rows());
    double last_growth = -1.0;
    double prev_est = -1.0;
    int stable = 0;
    for (std::size_t it = 1; it <= cap; ++it) {
        DenseVector u = m * v;
        const double growth = u.norm();
        if (growth == 0.0) return SpectralRadius{0.0, it, SpectralMethod::PowerIteration};
        v = u / growth;
        if (last_growth > 0.0) {
            const double est = std::sqrt(growth * last_growth);
            if (prev_est > 0.0 && std::abs(est - prev_est) <= tol * est) {
                if (++stable >= 3) return SpectralRadius{est, it, SpectralMethod::PowerIteration};
            } else {
                stable = 0;
            }
            prev_est = est;
        }
        last_growth = growth;
    }
    return std::nullopt;
}

}  // namespace

SpectralRadius spectral_radius(const Matrix& m, double tolerance, std::size_t max_iterations) {
    if (m.rows() != m.cols()) throw InvalidArgument("spectral_radius: matrix must be square");
    if (m.rows() == 0) return {};
    if (!m.allFinite()) throw NumericalFailure("spectral_radius: matrix has non-finite entries");
    const bool symmetric = m.isApprox(m.transpose(), 1e-14) || (m - m.transpose()).cwiseAbs().maxCoeff() == 0.0;
    auto found = symmetric ? power_symmetric(m, tolerance, max_iterations) : power_general(m, tolerance, max_iterations);
    if (found) return *found;
    if (m.rows() > kDenseFallbackLimit) {
        throw NumericalFailure("power iteration did not converge within " + std::to_string(max_iterations) +
                               " iterations on a " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                               " matrix (too large for the dense fallback)");
    }
    Eigen::EigenSolver<Matrix> solver(m, false);
    if (solver.info() != Eigen::Success) throw NumericalFailure("dense eigensolver failed");
    return SpectralRadius{solver.eigenvalues().cwiseAbs().maxCoeff(), max_iterations, SpectralMethod::DenseEigensolver};
}

}  // namespace difflab
