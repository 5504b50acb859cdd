#include "ecgxai/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ecgxai/dataset_io.hpp"
#include "ecgxai/error.hpp"

namespace ecgxai {

using nlohmann::json;

std::string_view to_string(AnnotationModality modality) noexcept {
  return modality == AnnotationModality::Ecg12 ? "ecg12" : "cine";
}

AnnotationModality annotation_modality_from_string(std::string_view text) {
  if (text == "ecg12") return AnnotationModality::Ecg12;
  if (text == "cine") return AnnotationModality::Cine;
  throw Error(ErrorKind::InvalidAnnotation, "unknown modality '" + std::string(text) + "'");
}

json to_json(const ExpertAnnotation& a) {
  json segments = json::array();
  for (const auto& s : a.segments) {
    json js;
    if (s.point_ms) {
      js["point_ms"] = *s.point_ms;
    } else {
      js["start_ms"] = s.start_ms;
      js["end_ms"] = s.end_ms;
    }
    if (s.leads) js["leads"] = *s.leads;
    if (s.normalized) js["normalized"] = true;
    segments.push_back(std::move(js));
  }
  json j = {{"case_id", a.case_id},
            {"annotator_id", a.annotator_id},
            {"modality", to_string(a.modality)},
            {"leads", a.leads},
            {"segments", std::move(segments)},
            {"free_text", a.free_text}};
  j["diagnosis"] = a.diagnosis ? json(to_string(*a.diagnosis)) : json(nullptr);
  return j;
}

ExpertAnnotation annotation_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::SchemaError, "annotation must be an object");
  auto need = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw Error(ErrorKind::SchemaError, key);
    return j.at(key);
  };
  ExpertAnnotation a;
  try {
    a.case_id = need("case_id").get<std::string>();
    a.annotator_id = j.value("annotator_id", std::string());
    a.modality = annotation_modality_from_string(need("modality").get<std::string>());
    if (j.contains("diagnosis") && !j.at("diagnosis").is_null()) {
      a.diagnosis = label_from_string(j.at("diagnosis").get<std::string>());
    }
    a.leads = j.value("leads", std::vector<std::string>{});
    for (const auto& js : need("segments")) {
      Segment s;
      if (js.contains("point_ms")) {
        s.point_ms = js.at("point_ms").get<double>();
      } else {
        if (!js.contains("start_ms")) throw Error(ErrorKind::SchemaError, "segments.start_ms");
        if (!js.contains("end_ms")) throw Error(ErrorKind::SchemaError, "segments.end_ms");
        s.start_ms = js.at("start_ms").get<double>();
        s.end_ms = js.at("end_ms").get<double>();
      }
      if (js.contains("leads")) s.leads = js.at("leads").get<std::vector<std::string>>();
      s.normalized = js.value("normalized", false);
      a.segments.push_back(std::move(s));
    }
    a.free_text = j.value("free_text", std::string());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, e.what());
  }
  validate(a);
  return a;
}

std::vector<ExpertAnnotation> annotations_from_json(const json& j) {
  std::vector<ExpertAnnotation> out;
  if (j.is_array()) {
    for (const auto& item : j) out.push_back(annotation_from_json(item));
  } else {
    out.push_back(annotation_from_json(j));
  }
  return out;
}

std::vector<ExpertAnnotation> load_annotations(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return annotations_from_json(json::parse(text));
  } catch (const json::parse_error&) {
    // fall through to NDJSON
  }
  std::vector<ExpertAnnotation> out;
  std::istringstream in(text);
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ParseError, path.string() + " line " + std::to_string(number) + ": " + e.what());
    }
    out.push_back(annotation_from_json(j));
  }
  return out;
}

namespace {

std::vector<std::size_t> lead_rows(const std::vector<std::string>& names) {
  std::vector<std::size_t> rows;
  for (const auto& name : names) {
    const auto found = lead_index(name);
    if (!found) throw Error(ErrorKind::InvalidAnnotation, "unknown lead '" + name + "'");
    const std::size_t row = *found;
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

bool is_cine_lead_list(const std::vector<std::string>& leads) {
  return leads.empty() || (leads.size() == 1 && leads.front() == "all");
}

}  // namespace

void validate(const ExpertAnnotation& a) {
  if (a.case_id.empty()) throw Error(ErrorKind::InvalidAnnotation, "empty case_id");
  if (a.modality == AnnotationModality::Ecg12) {
    if (a.leads.empty()) throw Error(ErrorKind::InvalidAnnotation, "ecg12 annotation lists no leads");
    const auto rows = lead_rows(a.leads);
    for (const auto& s : a.segments) {
      if (!s.leads) continue;
      for (auto r : lead_rows(*s.leads)) {
        if (!std::binary_search(rows.begin(), rows.end(), r)) {
          throw Error(ErrorKind::InvalidAnnotation, "segment lead outside the annotation's lead set");
        }
      }
    }
  } else if (!is_cine_lead_list(a.leads)) {
    throw Error(ErrorKind::InvalidAnnotation, "cine annotation leads must be [\"all\"]");
  }
  for (const auto& s : a.segments) {
    if (s.point_ms) {
      if (!std::isfinite(*s.point_ms)) throw Error(ErrorKind::InvalidAnnotation, "non-finite point");
    } else if (!std::isfinite(s.start_ms) || !std::isfinite(s.end_ms) || s.end_ms < s.start_ms) {
      throw Error(ErrorKind::InvalidAnnotation, "segment end precedes start");
    }
  }
}

CellMask BinaryMask::region() const {
  CellMask r = CellMask::Constant(cells.rows(), cells.cols(), false);
  for (auto row : selected_leads) r.row(static_cast<Eigen::Index>(row)).setConstant(true);
  return r;
}

BinaryMask annotation_to_mask(const ExpertAnnotation& a, int sample_rate_hz, double window_ms) {
  validate(a);
  if (sample_rate_hz <= 0 || !(window_ms > 0)) throw Error(ErrorKind::InvalidConfig, "bad rate or window");
  const auto samples = static_cast<Eigen::Index>(window_samples(window_ms, sample_rate_hz));
  const bool cine = a.modality == AnnotationModality::Cine;
  BinaryMask mask;
  mask.cells = CellMask::Constant(cine ? 1 : static_cast<Eigen::Index>(kLeadCount), samples, false);
  mask.selected_leads = cine ? std::vector<std::size_t>{0} : lead_rows(a.leads);

  auto to_index = [&](double ms) {
    const auto idx = static_cast<Eigen::Index>(std::lround(ms * sample_rate_hz / 1000.0));
    return std::clamp<Eigen::Index>(idx, 0, samples);
  };
  for (const auto& s : a.segments) {
    double lo = 0.0;
    double hi = 0.0;
    if (s.point_ms) {
      if (*s.point_ms < 0.0 || *s.point_ms > window_ms) {
        throw Error(ErrorKind::OutOfWindow, "point at " + std::to_string(*s.point_ms) + " ms");
      }
      lo = *s.point_ms - kPointToleranceMs;
      hi = *s.point_ms + kPointToleranceMs;
    } else {
      if (s.end_ms < 0.0 || s.start_ms > window_ms) {
        throw Error(ErrorKind::OutOfWindow, "segment " + std::to_string(s.start_ms) + "-" + std::to_string(s.end_ms) + " ms");
      }
      lo = s.start_ms;
      hi = s.end_ms;
      if (!s.normalized) {
        const double centre = (lo + hi) / 2.0;
        const double minimum = centre < kQrsRegionEndMs ? kQrsMinimumMs : kRemainderMinimumMs;
        if (hi - lo < minimum) {
          lo = centre - minimum / 2.0;
          hi = centre + minimum / 2.0;
        }
      }
    }
    lo = std::max(lo, 0.0);
    hi = std::min(hi, window_ms);
    const auto begin = to_index(lo);
    const auto end = to_index(hi);
    if (end <= begin) continue;
    const auto rows = cine ? std::vector<std::size_t>{0} : lead_rows(s.leads ? *s.leads : a.leads);
    for (auto r : rows) mask.cells.row(static_cast<Eigen::Index>(r)).segment(begin, end - begin).setConstant(true);
  }
  if (!(mask.cells && mask.region()).any()) throw Error(ErrorKind::EmptyGroundTruth, "annotation marks no samples");
  return mask;
}

ExpertAnnotation mask_to_annotation(const BinaryMask& mask, int sample_rate_hz, const ExpertAnnotation& like) {
  ExpertAnnotation a;
  a.case_id = like.case_id;
  a.annotator_id = like.annotator_id;
  a.diagnosis = like.diagnosis;
  a.free_text = like.free_text;
  const bool cine = mask.cells.rows() == 1;
  a.modality = cine ? AnnotationModality::Cine : AnnotationModality::Ecg12;
  if (cine) {
    a.leads = {"all"};
  } else {
    for (auto r : mask.selected_leads) a.leads.emplace_back(kLeadNames[r]);
  }
  auto ms = [&](Eigen::Index idx) { return static_cast<double>(idx) * 1000.0 / sample_rate_hz; };

  bool uniform = true;
  for (auto r : mask.selected_leads) {
    uniform = uniform && (mask.cells.row(static_cast<Eigen::Index>(r)) ==
                          mask.cells.row(static_cast<Eigen::Index>(mask.selected_leads.front())))
                             .all();
  }
  auto emit_runs = [&](Eigen::Index row, std::optional<std::vector<std::string>> leads) {
    const Eigen::Index n = mask.cells.cols();
    for (Eigen::Index t = 0; t < n;) {
      if (!mask.cells(row, t)) {
        ++t;
        continue;
      }
      Eigen::Index end = t;
      while (end < n && mask.cells(row, end)) ++end;
      Segment s;
      s.start_ms = ms(t);
      s.end_ms = ms(end);
      s.leads = leads;
      s.normalized = true;
      a.segments.push_back(std::move(s));
      t = end;
    }
  };
  if (mask.selected_leads.empty()) return a;
  if (uniform) {
    emit_runs(static_cast<Eigen::Index>(mask.selected_leads.front()), std::nullopt);
  } else {
    for (auto r : mask.selected_leads) {
      emit_runs(static_cast<Eigen::Index>(r), std::vector<std::string>{std::string(kLeadNames[r])});
    }
  }
  return a;
}

OverlapCounts overlap(const CellMask& predicted, const CellMask& truth, const CellMask& region) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols() || region.rows() != truth.rows() ||
      region.cols() != truth.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "mask shapes differ");
  }
  OverlapCounts c;
  c.predicted = static_cast<std::size_t>((predicted && region).count());
  c.truth = static_cast<std::size_t>((truth && region).count());
  c.both = static_cast<std::size_t>((predicted && truth && region).count());
  if (c.truth == 0) throw Error(ErrorKind::EmptyGroundTruth, "ground truth has no cells in the region");
  return c;
}

namespace {

double dice_of(const OverlapCounts& c) {
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.predicted + c.truth);
}

double iou_of(const OverlapCounts& c) {
  return static_cast<double>(c.both) / static_cast<double>(c.predicted + c.truth - c.both);
}

}  // namespace

double dice(const CellMask& predicted, const CellMask& truth, const CellMask& region) {
  return dice_of(overlap(predicted, truth, region));
}

double iou(const CellMask& predicted, const CellMask& truth, const CellMask& region) {
  return iou_of(overlap(predicted, truth, region));
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto l, auto r) { return values[l] < values[r]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::ShapeMismatch, "spearman inputs differ in length");
  if (x.size() < 2) throw Error(ErrorKind::DegenerateRegion, "spearman needs at least two cells");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (syy == 0.0) throw Error(ErrorKind::DegenerateRegion, "reference values are constant");
  if (sxx == 0.0) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

SpearmanResult spearman(const Matrix& map, const CellMask& truth, const CellMask& region) {
  if (map.rows() != truth.rows() || map.cols() != truth.cols() || region.rows() != truth.rows() ||
      region.cols() != truth.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "map and mask shapes differ");
  }
  std::vector<double> x;
  std::vector<double> y;
  for (Eigen::Index c = 0; c < map.rows(); ++c) {
    for (Eigen::Index t = 0; t < map.cols(); ++t) {
      if (!region(c, t)) continue;
      x.push_back(map(c, t));
      y.push_back(truth(c, t) ? 1.0 : 0.0);
    }
  }
  return spearman(x, y);
}

ThresholdResult optimal_threshold(const Matrix& map, const CellMask& truth, const CellMask& region) {
  if (map.rows() != truth.rows() || map.cols() != truth.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "map and mask shapes differ");
  }
  ThresholdResult best{0.0, -1.0, 0.0};
  for (int k = 0; k <= kThresholdSteps; ++k) {
    const double t = k / static_cast<double>(kThresholdSteps);
    const CellMask predicted = map.array() >= t;
    const auto counts = overlap(predicted, truth, region);
    const double d = dice_of(counts);
    if (d > best.dice) best = {t, d, iou_of(counts)};
  }
  return best;
}

json to_json(const AlignmentResult& r) {
  return {{"case_id", r.case_id},
          {"method", r.config.method},
          {"prep", r.config.prep},
          {"representation", r.config.representation},
          {"dice", r.dice},
          {"iou", r.iou},
          {"spearman", r.spearman},
          {"spearman_degenerate", r.spearman_degenerate},
          {"threshold", r.threshold}};
}

AlignmentResult alignment_result_from_json(const json& j) {
  AlignmentResult r;
  try {
    r.case_id = j.at("case_id").get<std::string>();
    r.config = {j.at("method").get<std::string>(), j.at("prep").get<std::string>(),
                j.at("representation").get<std::string>()};
    r.dice = j.at("dice").get<double>();
    r.iou = j.at("iou").get<double>();
    r.spearman = j.at("spearman").get<double>();
    r.spearman_degenerate = j.value("spearman_degenerate", false);
    r.threshold = j.at("threshold").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, e.what());
  }
  return r;
}

AlignmentResult align_case(const std::string& case_id, const ImportanceMap& map, const CellMask& truth,
                           const CellMask& region, const AlignConfig& config) {
  if (map.values.rows() != region.rows() || map.values.cols() != region.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "map and region shapes differ");
  }
  if (!region.any()) throw Error(ErrorKind::EmptyRegion, "evaluation region has no cells");
  Matrix swept = map.values;
  if (map.prep != Prep::Scaled) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index c = 0; c < swept.rows(); ++c) {
      for (Eigen::Index t = 0; t < swept.cols(); ++t) {
        if (!region(c, t)) continue;
        lo = std::min(lo, swept(c, t));
        hi = std::max(hi, swept(c, t));
      }
    }
    swept = hi > lo ? Matrix((swept.array() - lo) / (hi - lo)) : Matrix::Zero(swept.rows(), swept.cols());
  }
  const auto best = optimal_threshold(swept, truth, region);
  AlignmentResult r;
  r.case_id = case_id;
  r.dice = best.dice;
  r.iou = best.iou;
  r.threshold = best.threshold;
  r.config = config;
  // A region filled entirely by the ground truth has no rank contrast; record it as flagged.
  try {
    const auto rho = spearman(map.values, truth, region);
    r.spearman = rho.value;
    r.spearman_degenerate = rho.degenerate;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateRegion) throw;
    r.spearman = 0.0;
    r.spearman_degenerate = true;
  }
  return r;
}

}  // namespace ecgxai
