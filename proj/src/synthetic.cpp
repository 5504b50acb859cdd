#include "ecgxai/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ecgxai/error.hpp"

namespace ecgxai {

Matrix dower_lead_matrix() {
  Matrix m(12, 3);
  // Columns: x, y, z.
  m << 0.632, -0.235, 0.059,     // I
      0.235, 1.066, -0.132,      // II
      -0.397, 1.301, -0.191,     // III = II - I
      -0.4335, -0.4155, 0.0365,  // aVR = -(I + II) / 2
      0.5145, -0.768, 0.125,     // aVL = I - II / 2
      -0.081, 1.1835, -0.1615,   // aVF = II - I / 2
      -0.515, 0.157, -0.917,     // V1
      0.044, 0.164, -1.387,      // V2
      0.882, 0.098, -1.277,      // V3
      1.213, 0.127, -0.601,      // V4
      1.125, 0.127, -0.086,      // V5
      0.831, 0.076, 0.230;       // V6
  return m;
}

Matrix load_lead_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  Matrix m(12, 3);
  std::string line;
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string name;
    std::getline(ss, name, ',');
    if (row >= 12) throw Error(ErrorKind::ShapeMismatch, "lead matrix has more than 12 rows");
    if (kLeadNames[static_cast<std::size_t>(row)] != name) {
      throw Error(ErrorKind::SchemaError, "unexpected lead '" + name + "' in " + path.string());
    }
    for (Eigen::Index c = 0; c < 3; ++c) {
      std::string cell;
      if (!std::getline(ss, cell, ',')) throw Error(ErrorKind::ShapeMismatch, "lead matrix row needs 3 values");
      m(row, c) = std::stod(cell);
    }
    ++row;
  }
  if (row != 12) throw Error(ErrorKind::ShapeMismatch, "lead matrix must have 12 rows");
  return m;
}

void validate(const GeneratorConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!std::isfinite(v) || v <= 0.0) throw Error(ErrorKind::InvalidConfig, std::string(name) + " must be positive");
  };
  auto non_negative = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::InvalidConfig, std::string(name) + " must be non-negative");
    }
  };
  positive(c.window_ms, "window_ms");
  if (c.sample_rate_hz <= 0) throw Error(ErrorKind::InvalidConfig, "sample_rate_hz must be positive");
  non_negative(c.noise_sigma, "noise_sigma");
  if (c.lead_matrix.rows() != 12 || c.lead_matrix.cols() != 3 || !c.lead_matrix.allFinite()) {
    throw Error(ErrorKind::InvalidConfig, "lead_matrix must be a finite 12 x 3 matrix");
  }
  positive(c.qrs_center_ms, "qrs_center_ms");
  positive(c.qrs_width_ms, "qrs_width_ms");
  positive(c.qrs_amplitude, "qrs_amplitude");
  positive(c.t_center_ms, "t_center_ms");
  positive(c.t_width_ms, "t_width_ms");
  positive(c.t_amplitude, "t_amplitude");
  non_negative(c.timing_jitter_ms, "timing_jitter_ms");
  non_negative(c.amplitude_jitter, "amplitude_jitter");
  positive(c.st_offset_amplitude, "st_offset_amplitude");
  positive(c.st_duration_ms, "st_duration_ms");
  positive(c.st_start_min_ms, "st_start_min_ms");
  positive(c.qrs_widening_factor, "qrs_widening_factor");
  if (!(c.st_start_max_ms >= c.st_start_min_ms) || c.st_start_max_ms + c.st_duration_ms > c.window_ms) {
    throw Error(ErrorKind::InvalidConfig, "ST window must fit inside the record window");
  }
  if (c.qrs_center_ms >= 150.0) throw Error(ErrorKind::InvalidConfig, "qrs_center_ms must lie inside 0-150 ms");
}

namespace {

double bump(double t, double center, double width) {
  const double z = (t - center) / width;
  return std::exp(-0.5 * z * z);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

SyntheticCase generate_synthetic_case(std::uint64_t seed, Label label, const GeneratorConfig& config) {
  validate(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto jitter_amp = [&](double a) { return a * std::max(0.2, 1.0 + config.amplitude_jitter * gauss(rng)); };

  const std::size_t n = window_samples(config.window_ms, config.sample_rate_hz);
  const double qrs_center = config.qrs_center_ms + config.timing_jitter_ms * gauss(rng);
  const double t_center = config.t_center_ms + config.timing_jitter_ms * gauss(rng);
  const double qrs_amp = jitter_amp(config.qrs_amplitude);
  const double t_amp = jitter_amp(config.t_amplitude);

  AbnormalKind kind = config.abnormal_kind;
  if (kind == AbnormalKind::Mixed) kind = std::bernoulli_distribution(0.5)(rng) ? AbnormalKind::StOffset
                                                                                  : AbnormalKind::QrsWidening;
  const bool widened = label == Label::Abnormal && kind == AbnormalKind::QrsWidening;
  const bool st_offset = label == Label::Abnormal && kind == AbnormalKind::StOffset;
  const double qrs_width = config.qrs_width_ms * (widened ? config.qrs_widening_factor : 1.0);
  const double st_start = std::uniform_real_distribution<double>(config.st_start_min_ms, config.st_start_max_ms)(rng);
  const double st_end = st_start + config.st_duration_ms;
  const Eigen::Vector3d st_direction = Eigen::Vector3d(0.5, -0.6, 0.62).normalized();
  constexpr double kEdgeMs = 3.0;

  Matrix path(3, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 1000.0 * static_cast<double>(i) / config.sample_rate_hz;
    const double qc = qrs_center;
    const double w = qrs_width;
    Eigen::Vector3d p;
    p.x() = qrs_amp * (bump(t, qc - 6.0, w) - 0.25 * bump(t, qc + 14.0, w));
    p.y() = qrs_amp * 0.8 * bump(t, qc, w);
    p.z() = qrs_amp * (-0.6 * bump(t, qc - 10.0, w) + 0.5 * bump(t, qc + 10.0, w));
    p.x() += t_amp * 0.9 * bump(t, t_center - 10.0, config.t_width_ms);
    p.y() += t_amp * 0.7 * bump(t, t_center, config.t_width_ms);
    p.z() -= t_amp * 0.5 * bump(t, t_center + 10.0, config.t_width_ms);
    if (st_offset) {
      const double plateau = logistic((t - st_start) / kEdgeMs) * logistic((st_end - t) / kEdgeMs);
      p += config.st_offset_amplitude * plateau * st_direction;
    }
    path.col(static_cast<Eigen::Index>(i)) = p;
  }

  Matrix leads = config.lead_matrix * path;
  if (config.noise_sigma > 0.0) {
    for (Eigen::Index r = 0; r < leads.rows(); ++r) {
      for (Eigen::Index c = 0; c < leads.cols(); ++c) leads(r, c) += config.noise_sigma * gauss(rng);
    }
  }

  SyntheticCase out;
  const std::string id = "syn-" + std::to_string(seed);
  out.ecg = EcgRecord{id, std::move(leads), config.sample_rate_hz, label, "p-" + std::to_string(seed)};
  out.cine = CineTrajectory{id, std::move(path), config.sample_rate_hz};
  if (st_offset) {
    out.truth = {st_start, st_end, "ST-level offset"};
  } else {
    const double half = 2.5 * qrs_width;
    out.truth = {std::max(0.0, qrs_center - half), std::min(150.0, qrs_center + half),
                 widened ? "widened QRS complex" : "QRS complex"};
  }
  return out;
}

Case to_case(SyntheticCase synthetic) {
  Case c;
  c.ecg = std::move(synthetic.ecg);
  c.cine = std::move(synthetic.cine);
  c.truth = std::move(synthetic.truth);
  return c;
}

Dataset generate_cohort(std::size_t n_normal, std::size_t n_abnormal, std::uint64_t seed_base,
                        const GeneratorConfig& config) {
  Dataset dataset;
  dataset.reserve(n_normal + n_abnormal);
  for (std::size_t i = 0; i < n_normal + n_abnormal; ++i) {
    const Label label = i < n_normal ? Label::Normal : Label::Abnormal;
    dataset.push_back(to_case(generate_synthetic_case(seed_base + i, label, config)));
  }
  return dataset;
}

}  // namespace ecgxai
