#include "ecgxai/dataset_io.hpp"
#include "ecgxai/error.hpp"
#include "ecgxai/harness.hpp"

namespace ecgxai {

using nlohmann::json;

Overlay make_overlay(std::string modality, const Matrix& raw) {
  Overlay o;
  o.modality = std::move(modality);
  const double peak = raw.size() ? raw.cwiseAbs().maxCoeff() : 0.0;
  o.scale = peak > 0.0 ? peak : 1.0;
  o.values = raw / o.scale;
  return o;
}

json export_case_bundle(const Case& c, std::span<const Overlay> overlays, std::optional<Label> diagnosis,
                        std::optional<Label> prediction, bool blind) {
  json j = {{"case_id", c.ecg.case_id},
            {"sample_rate_hz", c.ecg.sample_rate_hz},
            {"window_ms", static_cast<double>(c.ecg.leads.cols()) * 1000.0 / c.ecg.sample_rate_hz},
            {"lead_names", kLeadNames},
            {"ecg", matrix_to_json(c.ecg.leads)},
            {"blind", blind}};
  if (c.cine) j["cine"] = matrix_to_json(c.cine->path);
  if (blind) return j;
  json ov = json::object();
  for (const auto& o : overlays) ov[o.modality] = {{"values", matrix_to_json(o.values)}, {"scale", o.scale}};
  j["overlays"] = std::move(ov);
  j["label"] = to_string(c.ecg.label);
  if (diagnosis) j["diagnosis"] = to_string(*diagnosis);
  if (prediction) j["prediction"] = to_string(*prediction);
  return j;
}

ExpertAnnotation annotation_from_truth(const Case& c, AnnotationModality modality) {
  if (!c.truth) throw Error(ErrorKind::MissingAnnotation, "case " + c.ecg.case_id + " has no truth window");
  ExpertAnnotation a;
  a.case_id = c.ecg.case_id;
  a.annotator_id = "truth-window";
  a.modality = modality;
  a.diagnosis = c.ecg.label;
  if (modality == AnnotationModality::Ecg12) {
    a.leads.assign(kLeadNames.begin(), kLeadNames.end());
  } else {
    a.leads = {"all"};
  }
  Segment s;
  s.start_ms = c.truth->start_ms;
  s.end_ms = c.truth->end_ms;
  a.segments.push_back(s);
  a.free_text = c.truth->description;
  return a;
}

bool has_label_keys(const json& j) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      if (key == "label" || key == "diagnosis" || key == "prediction") return true;
      if (has_label_keys(value)) return true;
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (has_label_keys(v)) return true;
    }
  }
  return false;
}

}  // namespace ecgxai
