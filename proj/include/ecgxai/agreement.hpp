#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ecgxai/crossmodal.hpp"
#include "ecgxai/signal.hpp"

namespace ecgxai {

enum class AnnotationModality { Ecg12, Cine };
std::string_view to_string(AnnotationModality modality) noexcept;
AnnotationModality annotation_modality_from_string(std::string_view text);

// Either an interval [start_ms, end_ms) or a point. `leads` narrows the segment to a
// subset of the annotation's leads. `normalized` marks segments that are already
// sample-aligned and minimum-width (written by mask_to_annotation); they are
// rasterised as-is.
struct Segment {
  double start_ms = 0.0;
  double end_ms = 0.0;
  std::optional<double> point_ms;
  std::optional<std::vector<std::string>> leads;
  bool normalized = false;
};

struct ExpertAnnotation {
  std::string case_id;
  std::string annotator_id;
  AnnotationModality modality = AnnotationModality::Ecg12;
  std::optional<Label> diagnosis;
  std::vector<std::string> leads;  // lead names, or {"all"} for cine
  std::vector<Segment> segments;
  std::string free_text;
};

nlohmann::json to_json(const ExpertAnnotation& a);
ExpertAnnotation annotation_from_json(const nlohmann::json& j);
// Accepts a single object or an array of annotations.
std::vector<ExpertAnnotation> annotations_from_json(const nlohmann::json& j);
void validate(const ExpertAnnotation& a);
// JSON object, JSON array or NDJSON file.
std::vector<ExpertAnnotation> load_annotations(const std::filesystem::path& path);

inline constexpr double kPointToleranceMs = 10.0;
inline constexpr double kQrsRegionEndMs = 150.0;
inline constexpr double kQrsMinimumMs = 25.0;
inline constexpr double kRemainderMinimumMs = 50.0;

struct BinaryMask {
  CellMask cells;                          // 12 x T (ecg12) or 1 x T (cine)
  std::vector<std::size_t> selected_leads;  // rows used for evaluation
  CellMask region() const;
};

BinaryMask annotation_to_mask(const ExpertAnnotation& a, int sample_rate_hz, double window_ms);
// Inverse of annotation_to_mask on its own output: one normalized segment per run of
// true samples. Identity fields (case, annotator, diagnosis, text) come from `like`.
ExpertAnnotation mask_to_annotation(const BinaryMask& mask, int sample_rate_hz, const ExpertAnnotation& like);

struct OverlapCounts {
  std::size_t predicted = 0;
  std::size_t truth = 0;
  std::size_t both = 0;
};

OverlapCounts overlap(const CellMask& predicted, const CellMask& truth, const CellMask& region);
double dice(const CellMask& predicted, const CellMask& truth, const CellMask& region);
double iou(const CellMask& predicted, const CellMask& truth, const CellMask& region);

struct SpearmanResult {
  double value = 0.0;
  bool degenerate = false;  // the map had no variance inside the region
};

// Average ranks for ties (1-based).
std::vector<double> average_ranks(std::span<const double> values);
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);
SpearmanResult spearman(const Matrix& map, const CellMask& truth, const CellMask& region);

struct ThresholdResult {
  double threshold = 0.0;
  double dice = 0.0;
  double iou = 0.0;
};

inline constexpr int kThresholdSteps = 100;

// Sweeps t = k / 100 for k = 0..100 with prediction (map >= t) inside the region and
// keeps the lowest t reaching the best Dice.
ThresholdResult optimal_threshold(const Matrix& map, const CellMask& truth, const CellMask& region);

struct AlignConfig {
  std::string method;
  std::string prep;
  std::string representation;
};

struct AlignmentResult {
  std::string case_id;
  double dice = 0.0;
  double iou = 0.0;
  double spearman = 0.0;
  bool spearman_degenerate = false;
  double threshold = 0.0;
  AlignConfig config;
};

nlohmann::json to_json(const AlignmentResult& r);
AlignmentResult alignment_result_from_json(const nlohmann::json& j);

// Positive and Absolute maps are min-max rescaled over the region before the sweep;
// Spearman always uses the map as given.
AlignmentResult align_case(const std::string& case_id, const ImportanceMap& map, const CellMask& truth,
                           const CellMask& region, const AlignConfig& config);

}  // namespace ecgxai
