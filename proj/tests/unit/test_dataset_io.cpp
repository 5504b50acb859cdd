#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "ecgxai/dataset_io.hpp"
#include "ecgxai/synthetic.hpp"
#include "helpers.hpp"

using namespace ecgxai;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ecgxai_test_dataset_io";
  fs::create_directories(dir);
  return dir / name;
}

bool same_case(const Case& a, const Case& b) {
  bool same = a.ecg.case_id == b.ecg.case_id && a.ecg.patient_id == b.ecg.patient_id && a.ecg.label == b.ecg.label &&
              a.ecg.sample_rate_hz == b.ecg.sample_rate_hz && a.ecg.leads == b.ecg.leads &&
              a.window_offset == b.window_offset && a.cine.has_value() == b.cine.has_value() &&
              a.truth.has_value() == b.truth.has_value();
  if (same && a.cine) same = a.cine->path == b.cine->path && a.cine->sample_rate_hz == b.cine->sample_rate_hz;
  if (same && a.truth) {
    same = a.truth->start_ms == b.truth->start_ms && a.truth->end_ms == b.truth->end_ms &&
           a.truth->description == b.truth->description;
  }
  return same;
}

}  // namespace

TEST_CASE("dataset round trip keeps every field") {
  Dataset cohort = generate_cohort(5, 5, 11, GeneratorConfig{});
  cohort[3].window_offset = 7;
  const auto path = scratch("roundtrip.ndjson");
  save_dataset(path, cohort);
  const Dataset back = load_dataset(path);
  REQUIRE(back.size() == 10);
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(same_case(cohort[i], back[i]));
}

TEST_CASE("missing leads raise SchemaError naming the field") {
  std::istringstream in(R"({"case_id":"a","patient_id":"p","label":0,"sample_rate_hz":500})" "\n");
  try {
    read_dataset(in);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SchemaError);
    CHECK(std::string(e.what()).find("leads") != std::string::npos);
  }
}

TEST_CASE("empty input gives an empty dataset") {
  std::istringstream in("");
  CHECK(read_dataset(in).empty());
  std::istringstream blank("\n  \n");
  CHECK(read_dataset(blank).empty());
  const auto path = scratch("empty.ndjson");
  write_text_file(path, "");
  CHECK(load_dataset(path).empty());
}

TEST_CASE("parse errors carry the line number") {
  std::istringstream in("\n{not json\n");
  try {
    read_dataset(in);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("cine length must match the leads") {
  Case c = generate_cohort(1, 0, 1, GeneratorConfig{}).front();
  auto j = case_to_json(c);
  j["cine"] = matrix_to_json(c.cine->path.leftCols(10));
  CHECK(kind_of([&] { case_from_json(j); }) == ErrorKind::SchemaError);
}

TEST_CASE("string labels are accepted") {
  Case c = generate_cohort(0, 1, 1, GeneratorConfig{}).front();
  auto j = case_to_json(c);
  j["label"] = "Abnormal";
  CHECK(case_from_json(j).ecg.label == Label::Abnormal);
}

TEST_CASE("missing files raise IoError") {
  CHECK(kind_of([] { load_dataset("/nonexistent/ecgxai/data.ndjson"); }) == ErrorKind::IoError);
}
