#include "mmrecon/baseline.hpp"
#include "mmrecon/error.hpp"

#include <cmath>

namespace mmr {

using ad::Array;

ComplexImage CgSense(
  KSpace const &y, SamplingMask const &mask, CoilMaps const &coils, CgSenseOptions const &opt,
  std::vector<double> *residuals)
{
  if (!(opt.lambda >= 0.0)) { throw ConfigError("cg_sense: lambda must be non-negative"); }
  if (opt.iterations < 1) { throw ConfigError("cg_sense: at least one iteration is required"); }
  Array r = ApplyEH(y, coils, mask).array();
  Array x(r.shape());
  Array p = r;
  double rs = ad::Dot(r, r);
  if (residuals) { residuals->push_back(std::sqrt(rs)); }
  for (std::size_t it = 0; it < opt.iterations && rs != 0.0; ++it) {
    Array ap = ApplyNormal(ComplexImage(p), coils, mask).array();
    if (opt.lambda != 0.0) { ad::Axpy(opt.lambda, p, ap); }
    double const alpha = rs / ad::Dot(p, ap);
    ad::Axpy(alpha, p, x);
    ad::Axpy(-alpha, ap, r);
    double const next = ad::Dot(r, r);
    if (residuals) { residuals->push_back(std::sqrt(next)); }
    double const beta = next / rs;
    for (std::size_t k = 0; k < p.size(); ++k) { p[k] = r[k] + beta * p[k]; }
    rs = next;
  }
  return ComplexImage(std::move(x));
}

} // namespace mmr
