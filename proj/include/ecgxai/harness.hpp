#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ecgxai/agreement.hpp"
#include "ecgxai/attribution.hpp"
#include "ecgxai/bootstrap.hpp"
#include "ecgxai/crossmodal.hpp"
#include "ecgxai/resnet1d.hpp"
#include "ecgxai/signal.hpp"

namespace ecgxai {

enum class Representation { Ecg12, CineDirect, CineMapped };
std::string_view to_string(Representation r) noexcept;
Representation representation_from_string(std::string_view text);

std::string sha256_hex(std::string_view bytes);

struct PoolConfig {
  std::vector<AttributionMethod> methods;
  std::vector<Prep> preps;
  std::vector<Representation> representations;
  std::vector<std::uint64_t> seeds{0};
  std::size_t bootstrap_B = 2000;
  double alpha = 0.05;
  std::filesystem::path data;
  std::filesystem::path annotations;
  std::filesystem::path baselines;  // optional: Normal reference cases
  std::filesystem::path checkpoint_ecg12;
  std::filesystem::path checkpoint_cine;
  std::filesystem::path cache_dir;
  AttributionParams params;
  std::size_t threads = 1;
  double window_ms = kDefaultWindowMs;
  std::vector<std::string> cases;  // optional filter; empty = every case in data
};

// Relative paths resolve against base_dir (the config file's directory).
PoolConfig pool_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
void validate(const PoolConfig& config);

struct LoadedModel {
  std::shared_ptr<const ResNet1d> model;
  std::string digest;
};

struct LoadedReference {
  ReferenceSet set;
  std::string digest;
};

// Everything a pool run reads, held in memory. Models are absent when their
// checkpoint is missing; affected cells then report MissingCheckpoint.
struct PoolInputs {
  Dataset cases;  // already truncated to the window
  std::vector<ExpertAnnotation> annotations;
  std::optional<LoadedModel> ecg12;
  std::optional<LoadedModel> cine;
  std::optional<LoadedReference> ecg_reference;
  std::optional<LoadedReference> cine_reference;
};

PoolInputs load_pool_inputs(const PoolConfig& config);
LoadedModel make_loaded_model(ResNet1d model);
LoadedReference make_loaded_reference(std::vector<Matrix> baselines);

struct PoolRow {
  AlignmentResult result;  // case id and config are always filled
  std::uint64_t seed = 0;
  std::optional<Label> diagnosis;
  std::optional<Label> prediction;
  std::optional<std::string> error;
};

nlohmann::json to_json(const PoolRow& row);
PoolRow pool_row_from_json(const nlohmann::json& j);
std::vector<PoolRow> read_results(std::istream& in);
std::string results_to_ndjson(std::span<const PoolRow> rows);

struct PoolStats {
  std::size_t cells = 0;
  std::size_t cache_hits = 0;
  std::size_t computed = 0;
  std::size_t errors = 0;
  std::size_t attributions_computed = 0;
};

struct PoolOutcome {
  std::vector<PoolRow> rows;  // canonical order: representation, method, prep, case, seed
  PoolStats stats;
};

// attribute -> bipolar profile -> [project to cine] -> orient -> post-process -> align,
// for every (case, method, prep, representation, seed). Cells are cached by content
// hash under cache_dir (if set) and errors are recorded per cell.
PoolOutcome run_pool(const PoolConfig& config, const PoolInputs& inputs);

// ---- reporting --------------------------------------------------------------------

struct ConfigSummary {
  AlignConfig config;
  std::size_t n = 0;
  BootstrapCI dice;
  BootstrapCI iou;
  BootstrapCI spearman;
};

struct StratumSummary {
  std::string representation;
  std::string axis;  // "diagnosis" or "agreement"
  std::string name;  // Normal / Abnormal / agree / disagree
  std::size_t n = 0;
  bool flagged = false;  // fewer than two cases
  std::optional<BootstrapCI> dice;
  std::optional<BootstrapCI> iou;
  std::optional<BootstrapCI> spearman;
};

struct CohortReport {
  std::vector<ConfigSummary> configs;
  std::map<std::string, std::size_t> winners;  // representation -> index into configs
  std::vector<StratumSummary> strata;          // per representation, for its winning config
  std::size_t B = 2000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::size_t error_rows = 0;
};

// Rows of one config collapse to one value per case (mean over seeds) before resampling.
CohortReport build_report(std::span<const PoolRow> rows, std::size_t B = 2000, double alpha = 0.05,
                          std::uint64_t seed = 0);

// Splits one config's rows by expert diagnosis and by prediction == diagnosis.
std::vector<StratumSummary> stratify(std::span<const PoolRow> rows, const std::string& representation,
                                     std::size_t B, double alpha, std::uint64_t seed);

// "0.56 (0.51–0.62)"
std::string format_ci(const BootstrapCI& ci);
std::string emit_markdown(const CohortReport& report);
nlohmann::json emit_json(const CohortReport& report);

// ---- UI bundles -----------------------------------------------------------------------

struct Overlay {
  std::string modality;  // "ecg12" or "cine"
  Matrix values;         // divided by scale, so within [-1, 1]
  double scale = 1.0;
};

Overlay make_overlay(std::string modality, const Matrix& raw);

nlohmann::json export_case_bundle(const Case& c, std::span<const Overlay> overlays, std::optional<Label> diagnosis,
                                  std::optional<Label> prediction, bool blind);

// Annotation marking a case's stored ground-truth window on every lead (ecg12) or on
// the trajectory (cine), with the case label as diagnosis.
ExpertAnnotation annotation_from_truth(const Case& c, AnnotationModality modality);

// True when any object key anywhere in the document is label, diagnosis or prediction.
bool has_label_keys(const nlohmann::json& j);

}  // namespace ecgxai
