#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ecgxai {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kLeadCount = 12;
inline constexpr std::size_t kSpatialDims = 3;
inline constexpr int kDefaultSampleRateHz = 500;
inline constexpr double kDefaultWindowMs = 400.0;

inline constexpr std::array<std::string_view, kLeadCount> kLeadNames = {
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"};

// Index of a lead name, or nullopt when the name is not one of the 12 standard leads.
std::optional<std::size_t> lead_index(std::string_view name);

enum class Label : int { Normal = 0, Abnormal = 1 };

std::string_view to_string(Label label) noexcept;
Label label_from_string(std::string_view text);
Label label_from_int(int value);

// 12 x T lead voltages in millivolts.
struct EcgRecord {
  std::string case_id;
  Matrix leads;
  int sample_rate_hz = kDefaultSampleRateHz;
  Label label = Label::Normal;
  std::string patient_id;

  std::size_t samples() const { return static_cast<std::size_t>(leads.cols()); }
};

// 3 x T spatial path (x, y, z per time step).
struct CineTrajectory {
  std::string case_id;
  Matrix path;
  int sample_rate_hz = kDefaultSampleRateHz;

  std::size_t samples() const { return static_cast<std::size_t>(path.cols()); }
};

struct GroundTruthWindow {
  double start_ms = 0.0;
  double end_ms = 0.0;
  std::string description;
};

// One row of a dataset file: the paired modalities of one case.
struct Case {
  EcgRecord ecg;
  std::optional<CineTrajectory> cine;
  std::optional<GroundTruthWindow> truth;
  std::size_t window_offset = 0;
};

using Dataset = std::vector<Case>;

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct CaseRef {
  std::string case_id;
  std::string patient_id;
  Label label = Label::Normal;
};

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

// floor(window_ms * rate / 1000)
std::size_t window_samples(double window_ms, int sample_rate_hz);

void validate(const EcgRecord& record);
void validate(const CineTrajectory& trajectory);

// Keeps samples [offset, offset + window) of every lead.
EcgRecord truncate_window(const EcgRecord& raw, double window_ms, std::size_t offset = 0);
CineTrajectory truncate_window(const CineTrajectory& raw, double window_ms, std::size_t offset = 0);

// Applies truncate_window to both modalities using the case's stored offset.
Case truncate_case(const Case& raw, double window_ms);

// Patient-level stratified shuffle split. All cases of one patient land in the same
// partition; each class is allotted to partitions independently by ratio.
DatasetSplit stratified_split(std::span<const CaseRef> cases, SplitRatios ratios, std::uint64_t seed);

std::vector<CaseRef> case_refs(const Dataset& dataset);

}  // namespace ecgxai
