#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace ecgxai {

struct BootstrapCI {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t B = 0;
  std::size_t n = 0;
  std::string method = "BCa";
  bool degenerate = false;  // n = 1 or zero variance: point interval
};

nlohmann::json to_json(const BootstrapCI& ci);
BootstrapCI bootstrap_ci_from_json(const nlohmann::json& j);

// Case-level resampling of the mean. Endpoints come from the bias-corrected and
// accelerated percentiles; z0 is clamped away from 0/1 by 1/(2B).
BootstrapCI bca_bootstrap(std::span<const double> values, std::size_t B = 2000, double alpha = 0.05,
                          std::uint64_t seed = 0);

// Sorted bootstrap means for the given seed (the same draws bca_bootstrap uses).
std::vector<double> bootstrap_means(std::span<const double> values, std::size_t B, std::uint64_t seed);

// Linear interpolation between order statistics of a sorted sample, q in [0, 1].
double sorted_quantile(std::span<const double> sorted, double q);

// Interval endpoints from sorted replicates with explicit bias and acceleration.
std::pair<double, double> bca_endpoints(std::span<const double> sorted_replicates, double z0, double accel,
                                        double alpha);

// Jackknife acceleration of the mean.
double jackknife_acceleration(std::span<const double> values);

}  // namespace ecgxai
