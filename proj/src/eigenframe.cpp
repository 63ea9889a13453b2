#include "stochcoll/eigenframe.hpp"

#include <cmath>

namespace stochcoll {

MinkowskiReport minkowski_statistical_residual(std::span<const CollisionEvent<double>> events, int batches) {
  if (events.size() < 2) throw InvalidArgument("minkowski_statistical_residual: need at least two events");
  const double gamma2 = events.front().masses.gamma2();
  const std::size_t n = events.size();
  std::vector<double> residual(n), flux(n), a2(n), s2(n), dE(n);
  double frame_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = events[i];
    if (e.masses.gamma2() != gamma2) throw InvalidArgument("minkowski_statistical_residual: mixed mass ratios");
    const auto f = decompose(e);
    const auto terms = minkowski_frame_terms(e);
    const double scale = std::max({1.0, e.v1.squaredNorm(), e.w1.squaredNorm()});
    frame_max = std::max(frame_max, std::abs(terms.residual()) / scale);
    const Vec3 s = f.g + f.g_perp;
    residual[i] = (e.w2.squaredNorm() - e.v2.squaredNorm()) - (e.w1.squaredNorm() - e.v1.squaredNorm());
    flux[i] = f.a.dot(s);
    a2[i] = f.a.squaredNorm();
    s2[i] = s.squaredNorm();
    dE[i] = (e.v2.squaredNorm() - e.v1.squaredNorm()) / 2.0;
  }
  MinkowskiReport r;
  r.n = n;
  r.gamma2 = gamma2;
  r.frame_residual = frame_max;
  const MeanSe res = batch_mean_se(residual, batches);
  const MeanSe fl = batch_mean_se(flux, batches);
  r.statistical_residual = res.mean;
  r.statistical_se = res.se;
  r.flux = fl.mean;
  r.flux_se = fl.se;
  r.app_f_flux = -fl.mean;
  const double denom = std::sqrt(mean(a2) * mean(s2));
  r.correlation_rho = denom > 0.0 ? fl.mean / denom : 0.0;
  r.delta_E = gamma2 * fl.mean;
  r.delta_E_direct = mean(dE);
  r.identity_gap = r.statistical_residual - 2.0 * (1.0 + gamma2) * r.app_f_flux;
  return r;
}

}  // namespace stochcoll
