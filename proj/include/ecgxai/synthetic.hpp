#pragma once

#include <cstdint>
#include <filesystem>

#include "ecgxai/signal.hpp"

namespace ecgxai {

// Dower-style 12 x 3 transform from a vectorcardiographic dipole (x, y, z) to the
// 12 standard leads, rows ordered as kLeadNames. The same coefficients ship in
// data/lead_matrix.csv.
Matrix dower_lead_matrix();

// Parses a 12 x 3 CSV with a leading lead-name column; '#' lines are comments.
Matrix load_lead_matrix(const std::filesystem::path& path);

enum class AbnormalKind { StOffset, QrsWidening, Mixed };

struct GeneratorConfig {
  double window_ms = kDefaultWindowMs;
  int sample_rate_hz = kDefaultSampleRateHz;
  double noise_sigma = 0.02;
  Matrix lead_matrix = dower_lead_matrix();

  // Depolarisation loop, a sum of Gaussian bumps inside 0-150 ms.
  double qrs_center_ms = 60.0;
  double qrs_width_ms = 10.0;
  double qrs_amplitude = 1.2;
  // Repolarisation loop.
  double t_center_ms = 280.0;
  double t_width_ms = 35.0;
  double t_amplitude = 0.35;

  double timing_jitter_ms = 6.0;
  double amplitude_jitter = 0.12;

  AbnormalKind abnormal_kind = AbnormalKind::StOffset;
  double st_offset_amplitude = 0.3;
  double st_duration_ms = 60.0;
  double st_start_min_ms = 160.0;
  double st_start_max_ms = 320.0;
  double qrs_widening_factor = 1.8;
};

void validate(const GeneratorConfig& config);

struct SyntheticCase {
  EcgRecord ecg;
  CineTrajectory cine;
  GroundTruthWindow truth;
};

// leads = lead_matrix * path + N(0, noise_sigma^2); cine.path = path exactly.
// Normal truth is the QRS interval (center +- 2.5 widths). Abnormal cases carry an
// ST-level plateau offset or a widened QRS, and the truth window marks it.
SyntheticCase generate_synthetic_case(std::uint64_t seed, Label label, const GeneratorConfig& config);

Case to_case(SyntheticCase synthetic);

// n_normal + n_abnormal cases with per-case seeds seed_base, seed_base + 1, ...
// Normal cases come first; each case is its own patient.
Dataset generate_cohort(std::size_t n_normal, std::size_t n_abnormal, std::uint64_t seed_base,
                        const GeneratorConfig& config);

}  // namespace ecgxai
