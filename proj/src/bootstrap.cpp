#include "ecgxai/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "ecgxai/error.hpp"

namespace ecgxai {

using nlohmann::json;

json to_json(const BootstrapCI& ci) {
  return {{"mean", ci.mean}, {"lo", ci.lo},         {"hi", ci.hi},
          {"B", ci.B},       {"n", ci.n},           {"method", ci.method},
          {"degenerate", ci.degenerate}};
}

BootstrapCI bootstrap_ci_from_json(const json& j) {
  BootstrapCI ci;
  ci.mean = j.at("mean").get<double>();
  ci.lo = j.at("lo").get<double>();
  ci.hi = j.at("hi").get<double>();
  ci.B = j.value("B", std::size_t{0});
  ci.n = j.value("n", std::size_t{0});
  ci.method = j.value("method", std::string("BCa"));
  ci.degenerate = j.value("degenerate", false);
  return ci;
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::EmptyInput, "no replicates");
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(pos));
  const std::size_t above = std::min(below + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(below);
  return sorted[below] + frac * (sorted[above] - sorted[below]);
}

std::vector<double> bootstrap_means(std::span<const double> values, std::size_t B, std::uint64_t seed) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "bootstrap needs at least one value");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(B);
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[pick(rng)];
    m = sum / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  return means;
}

double jackknife_acceleration(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double total = std::accumulate(values.begin(), values.end(), 0.0);
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) loo[i] = (total - values[i]) / static_cast<double>(n - 1);
  const double bar = std::accumulate(loo.begin(), loo.end(), 0.0) / static_cast<double>(n);
  double num = 0.0;
  double den = 0.0;
  for (double v : loo) {
    const double d = bar - v;
    num += d * d * d;
    den += d * d;
  }
  if (den == 0.0) return 0.0;
  return num / (6.0 * std::pow(den, 1.5));
}

std::pair<double, double> bca_endpoints(std::span<const double> sorted_replicates, double z0, double accel,
                                        double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidConfig, "alpha must be in (0, 1)");
  const boost::math::normal standard;
  auto adjusted = [&](double tail) {
    const double z = boost::math::quantile(standard, tail);
    const double shifted = z0 + (z0 + z) / (1.0 - accel * (z0 + z));
    return boost::math::cdf(standard, shifted);
  };
  return {sorted_quantile(sorted_replicates, adjusted(alpha / 2.0)),
          sorted_quantile(sorted_replicates, adjusted(1.0 - alpha / 2.0))};
}

BootstrapCI bca_bootstrap(std::span<const double> values, std::size_t B, double alpha, std::uint64_t seed) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "bootstrap needs at least one value");
  if (B == 0) throw Error(ErrorKind::InvalidConfig, "B must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidConfig, "alpha must be in (0, 1)");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "bootstrap input is not finite");
  }
  BootstrapCI ci;
  ci.B = B;
  ci.n = values.size();
  ci.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (values.size() == 1 || *mn == *mx) {
    ci.lo = ci.hi = ci.mean;
    ci.degenerate = true;
    return ci;
  }

  const auto reps = bootstrap_means(values, B, seed);
  const auto below = static_cast<double>(std::lower_bound(reps.begin(), reps.end(), ci.mean) - reps.begin());
  const double floor_p = 1.0 / (2.0 * static_cast<double>(B));
  const double p = std::clamp(below / static_cast<double>(B), floor_p, 1.0 - floor_p);
  const double z0 = boost::math::quantile(boost::math::normal(), p);
  const double accel = jackknife_acceleration(values);
  const auto [lo, hi] = bca_endpoints(reps, z0, accel, alpha);
  ci.lo = std::min(lo, ci.mean);
  ci.hi = std::max(hi, ci.mean);
  return ci;
}

}  // namespace ecgxai
