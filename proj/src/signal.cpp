#include "ecgxai/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "ecgxai/error.hpp"

namespace ecgxai {

std::optional<std::size_t> lead_index(std::string_view name) {
  for (std::size_t i = 0; i < kLeadNames.size(); ++i) {
    if (kLeadNames[i] == name) return i;
  }
  return std::nullopt;
}

std::string_view to_string(Label label) noexcept {
  return label == Label::Abnormal ? "Abnormal" : "Normal";
}

Label label_from_string(std::string_view text) {
  if (text == "Normal" || text == "normal" || text == "0") return Label::Normal;
  if (text == "Abnormal" || text == "abnormal" || text == "1") return Label::Abnormal;
  throw Error(ErrorKind::SchemaError, "unknown label '" + std::string(text) + "'");
}

Label label_from_int(int value) {
  if (value == 0) return Label::Normal;
  if (value == 1) return Label::Abnormal;
  throw Error(ErrorKind::SchemaError, "label must be 0 or 1, got " + std::to_string(value));
}

std::size_t window_samples(double window_ms, int sample_rate_hz) {
  if (!(window_ms > 0.0) || !std::isfinite(window_ms)) {
    throw Error(ErrorKind::InvalidConfig, "window_ms must be positive");
  }
  if (sample_rate_hz <= 0) throw Error(ErrorKind::InvalidConfig, "sample_rate_hz must be positive");
  // The epsilon absorbs representation error in e.g. 0.4 * 500.
  return static_cast<std::size_t>(std::floor(window_ms * sample_rate_hz / 1000.0 + 1e-9));
}

namespace {

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw Error(ErrorKind::NonFinite, what + " contains non-finite values");
}

Matrix take_columns(const Matrix& m, std::size_t offset, std::size_t count, int rate) {
  const auto available = static_cast<std::size_t>(m.cols());
  if (offset + count > available) {
    throw Error(ErrorKind::SeriesTooShort,
                "series of " + std::to_string(available) + " samples at " + std::to_string(rate) +
                    " Hz needs " + std::to_string(offset + count));
  }
  return m.middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(count));
}

}  // namespace

void validate(const EcgRecord& record) {
  if (record.leads.rows() != static_cast<Eigen::Index>(kLeadCount)) {
    throw Error(ErrorKind::ShapeMismatch, "EcgRecord " + record.case_id + " must have 12 leads, has " +
                                              std::to_string(record.leads.rows()));
  }
  if (record.sample_rate_hz <= 0) throw Error(ErrorKind::InvalidConfig, "sample_rate_hz must be positive");
  require_finite(record.leads, "EcgRecord " + record.case_id);
}

void validate(const CineTrajectory& trajectory) {
  if (trajectory.path.rows() != static_cast<Eigen::Index>(kSpatialDims)) {
    throw Error(ErrorKind::ShapeMismatch, "CineTrajectory " + trajectory.case_id + " must have 3 rows");
  }
  if (trajectory.sample_rate_hz <= 0) throw Error(ErrorKind::InvalidConfig, "sample_rate_hz must be positive");
  require_finite(trajectory.path, "CineTrajectory " + trajectory.case_id);
}

EcgRecord truncate_window(const EcgRecord& raw, double window_ms, std::size_t offset) {
  const std::size_t n = window_samples(window_ms, raw.sample_rate_hz);
  EcgRecord out = raw;
  out.leads = take_columns(raw.leads, offset, n, raw.sample_rate_hz);
  return out;
}

CineTrajectory truncate_window(const CineTrajectory& raw, double window_ms, std::size_t offset) {
  const std::size_t n = window_samples(window_ms, raw.sample_rate_hz);
  CineTrajectory out = raw;
  out.path = take_columns(raw.path, offset, n, raw.sample_rate_hz);
  return out;
}

Case truncate_case(const Case& raw, double window_ms) {
  Case out = raw;
  out.ecg = truncate_window(raw.ecg, window_ms, raw.window_offset);
  if (raw.cine) out.cine = truncate_window(*raw.cine, window_ms, raw.window_offset);
  out.window_offset = 0;
  return out;
}

std::vector<CaseRef> case_refs(const Dataset& dataset) {
  std::vector<CaseRef> refs;
  refs.reserve(dataset.size());
  for (const auto& c : dataset) refs.push_back({c.ecg.case_id, c.ecg.patient_id, c.ecg.label});
  return refs;
}

DatasetSplit stratified_split(std::span<const CaseRef> cases, SplitRatios ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.val + ratios.test;
  if (std::abs(total - 1.0) > 1e-9 || ratios.train < 0 || ratios.val < 0 || ratios.test < 0) {
    throw Error(ErrorKind::InvalidConfig, "split ratios must be non-negative and sum to 1");
  }

  struct Patient {
    std::string id;
    std::vector<std::string> cases;
    int abnormal = 0;
    int normal = 0;
  };
  std::vector<Patient> patients;
  std::map<std::string, std::size_t> index;
  for (const auto& c : cases) {
    auto [it, inserted] = index.emplace(c.patient_id, patients.size());
    if (inserted) patients.push_back({c.patient_id, {}, 0, 0});
    auto& p = patients[it->second];
    p.cases.push_back(c.case_id);
    (c.label == Label::Abnormal ? p.abnormal : p.normal) += 1;
  }

  // A patient's stratum is the majority label of their cases.
  std::array<std::vector<const Patient*>, 2> strata;
  for (const auto& p : patients) strata[p.abnormal > p.normal ? 1 : 0].push_back(&p);

  std::mt19937_64 rng(seed);
  DatasetSplit split;
  for (std::size_t k = 0; k < strata.size(); ++k) {
    auto& group = strata[k];
    if (group.size() < 5) {
      throw Error(ErrorKind::InsufficientData, "class " + std::string(to_string(static_cast<Label>(k))) +
                                                   " has " + std::to_string(group.size()) +
                                                   " patients, need at least 5");
    }
    std::shuffle(group.begin(), group.end(), rng);
    const auto n = static_cast<double>(group.size());
    const auto n_train = static_cast<std::size_t>(std::lround(ratios.train * n));
    const auto n_val = static_cast<std::size_t>(std::lround(ratios.val * n));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= group.size()) {
      throw Error(ErrorKind::InsufficientData, "a partition would receive no cases of class " +
                                                   std::string(to_string(static_cast<Label>(k))));
    }
    for (std::size_t i = 0; i < group.size(); ++i) {
      auto& target = i < n_train ? split.train : (i < n_train + n_val ? split.val : split.test);
      target.insert(target.end(), group[i]->cases.begin(), group[i]->cases.end());
    }
  }
  return split;
}

}  // namespace ecgxai
