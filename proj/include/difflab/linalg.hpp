#pragma once

#include <cstddef>
#include <string_view>

#include "difflab/types.hpp"

namespace difflab {

enum class SpectralMethod { PowerIteration, DenseEigensolver };

std::string_view to_string(SpectralMethod method);

struct SpectralRadius {
    double value = 0.0;
    std::size_t iterations = 0;
    SpectralMethod method = SpectralMethod::PowerIteration;
};

inline constexpr double kPowerTolerance = 1e-10;
inline constexpr std::size_t kPowerIterationCap = 100000;
// Largest matrix handed to the dense eigensolver when power iteration stalls
// (complex or near-equal dominant eigenvalues).
inline constexpr Eigen::Index kDenseFallbackLimit = 512;

// Power iteration on M. Symmetric input uses the Rayleigh quotient; general
// input uses the geometric mean of two consecutive growth factors, which also
// settles when the dominant eigenvalues are a real +/- pair. Falls back to a
// dense eigensolver when that does not converge; throws NumericalFailure if
// the matrix is too large for the fallback.
SpectralRadius spectral_radius(const Matrix& m, double tolerance = kPowerTolerance,
                               std::size_t max_iterations = kPowerIterationCap);

}  // namespace difflab
