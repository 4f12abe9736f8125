#pragma once

#include <cmath>
#include <span>

#include "trotterfx/error.hpp"

namespace trotterfx {

struct ScalingFit {
  double exponent = 0.0;
  double prefactor = 0.0;  // y ~ prefactor * x^exponent
  double r2 = 0.0;
};

/// Least-squares line through (log x, log y).
inline ScalingFit scaling_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorKind::dimension_mismatch, "scaling_fit: xs and ys differ in length");
  if (xs.size() < 3) throw Error(ErrorKind::invalid_argument, "scaling_fit: need at least 3 points");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
      throw Error(ErrorKind::invalid_argument, "scaling_fit: data must be strictly positive");
    }
    sx += std::log(xs[i]);
    sy += std::log(ys[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx, dy = std::log(ys[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw Error(ErrorKind::invalid_argument, "scaling_fit: xs are all equal");
  ScalingFit fit;
  fit.exponent = sxy / sxx;
  fit.prefactor = std::exp(my - fit.exponent * mx);
  fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

}  // namespace trotterfx
