#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "ecgxai/attribution.hpp"
#include "ecgxai/signal.hpp"

namespace ecgxai {

using CellMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Phi = (A_abnormal - A_normal) / 2; positive values argue for the abnormal class.
struct BipolarProfile {
  Matrix values;
  AttributionMethod source_method = AttributionMethod::IntegratedGradients;
  std::string case_id;
};

BipolarProfile bipolar_profile(const ClassAttribution& a);

// Lead-summed profile normalised by its peak magnitude, applied identically to x, y, z.
struct MappedProfile {
  Eigen::RowVectorXd temporal;
  Matrix replicated;  // 3 x T
  bool degenerate = false;
};

MappedProfile map_to_cine(const BipolarProfile& phi);

// Phi' = -Phi for a Normal diagnosis; unchanged for Abnormal. nullopt throws MissingDiagnosis.
Matrix orient_by_diagnosis(const Matrix& phi, std::optional<Label> diagnosis);

enum class Prep { Positive, Absolute, Scaled };
std::string_view to_string(Prep prep) noexcept;
Prep prep_from_string(std::string_view text);

struct ImportanceMap {
  Matrix values;
  Prep prep = Prep::Positive;
  Label oriented_for = Label::Abnormal;
  bool constant = false;  // Scaled input had no spread inside the region
};

// Positive: max(0, x); Absolute: |x|; Scaled: min-max over the region cells.
ImportanceMap post_process(const Matrix& oriented, Prep prep, const CellMask& region, Label oriented_for);

}  // namespace ecgxai
