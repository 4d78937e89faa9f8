#pragma once

#include "physics.hpp"

#include <vector>

namespace mmr {

struct CgSenseOptions
{
  double lambda = 0.0; // Tikhonov weight
  std::size_t iterations = 30;
};

/// Conjugate gradient on (E^H E + lambda I) x = E^H y from x = 0. If
/// `residuals` is given it receives the residual norm before the first and
/// after every iteration. Stops early only on an exactly zero residual.
ComplexImage CgSense(
  KSpace const &y, SamplingMask const &mask, CoilMaps const &coils, CgSenseOptions const &opt = {},
  std::vector<double> *residuals = nullptr);

} // namespace mmr
