#include "ecgxai/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include "ecgxai/error.hpp"

namespace ecgxai {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw Error(ErrorKind::SchemaError, std::string(field) + " must be an array of arrays");
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j.front().size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw Error(ErrorKind::SchemaError, std::string(field) + " rows must be equal-length arrays");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw Error(ErrorKind::SchemaError, std::string(field) + " must hold numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  return m;
}

namespace {

const json& required(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) throw Error(ErrorKind::SchemaError, field);
  return *it;
}

}  // namespace

json case_to_json(const Case& c) {
  json j;
  j["case_id"] = c.ecg.case_id;
  j["patient_id"] = c.ecg.patient_id;
  j["label"] = static_cast<int>(c.ecg.label);
  j["sample_rate_hz"] = c.ecg.sample_rate_hz;
  j["leads"] = matrix_to_json(c.ecg.leads);
  if (c.cine) j["cine"] = matrix_to_json(c.cine->path);
  if (c.truth) {
    j["truth_window"] = {{"start_ms", c.truth->start_ms}, {"end_ms", c.truth->end_ms}};
    if (!c.truth->description.empty()) j["truth_window"]["description"] = c.truth->description;
  }
  if (c.window_offset != 0) j["offset"] = c.window_offset;
  return j;
}

Case case_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::SchemaError, "case must be a JSON object");
  Case c;
  c.ecg.case_id = required(j, "case_id").get<std::string>();
  c.ecg.patient_id = required(j, "patient_id").get<std::string>();
  const auto& label = required(j, "label");
  c.ecg.label = label.is_string() ? label_from_string(label.get<std::string>()) : label_from_int(label.get<int>());
  c.ecg.sample_rate_hz = required(j, "sample_rate_hz").get<int>();
  c.ecg.leads = matrix_from_json(required(j, "leads"), "leads");
  validate(c.ecg);
  if (auto it = j.find("cine"); it != j.end() && !it->is_null()) {
    c.cine = CineTrajectory{c.ecg.case_id, matrix_from_json(*it, "cine"), c.ecg.sample_rate_hz};
    validate(*c.cine);
    if (c.cine->samples() != c.ecg.samples()) {
      throw Error(ErrorKind::SchemaError, "cine length differs from leads length in " + c.ecg.case_id);
    }
  }
  if (auto it = j.find("truth_window"); it != j.end() && !it->is_null()) {
    GroundTruthWindow w;
    w.start_ms = required(*it, "start_ms").get<double>();
    w.end_ms = required(*it, "end_ms").get<double>();
    w.description = it->value("description", std::string{});
    c.truth = w;
  }
  c.window_offset = j.value("offset", std::size_t{0});
  return c;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& c : dataset) out << case_to_json(c).dump() << '\n';
}

Dataset read_dataset(std::istream& in) {
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      dataset.push_back(case_from_json(j));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return dataset;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ostringstream ss;
  write_dataset(ss, dataset);
  write_text_file(path, ss.str());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace ecgxai
