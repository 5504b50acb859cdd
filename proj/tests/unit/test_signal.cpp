#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ecgxai/error.hpp"
#include "helpers.hpp"
#include "ecgxai/signal.hpp"

using namespace ecgxai;

namespace {

EcgRecord record_of(int rate, Eigen::Index samples) {
  EcgRecord r;
  r.case_id = "r";
  r.sample_rate_hz = rate;
  r.leads = Matrix(kLeadCount, samples);
  for (Eigen::Index c = 0; c < r.leads.rows(); ++c) {
    for (Eigen::Index t = 0; t < samples; ++t) r.leads(c, t) = static_cast<double>(c * 10000 + t);
  }
  return r;
}

std::vector<CaseRef> balanced_patients(int patients, int cases_per_patient = 1) {
  std::vector<CaseRef> refs;
  for (int p = 0; p < patients; ++p) {
    for (int k = 0; k < cases_per_patient; ++k) {
      refs.push_back({"c" + std::to_string(p) + "_" + std::to_string(k), "p" + std::to_string(p),
                      p % 2 ? Label::Abnormal : Label::Normal});
    }
  }
  return refs;
}

}  // namespace

TEST_CASE("window length follows rate and duration") {
  CHECK(window_samples(400, 500) == 200);
  CHECK(window_samples(400, 250) == 100);
  CHECK(window_samples(10, 500) == 5);
  CHECK(kind_of([] { window_samples(0, 500); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { window_samples(400, 0); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("truncate_window keeps the leading window") {
  const auto raw = record_of(500, 5000);
  const auto out = truncate_window(raw, 400);
  CHECK(out.leads.cols() == 200);
  CHECK(out.leads.rows() == 12);
  CHECK(out.leads == raw.leads.leftCols(200));

  const auto exact = record_of(500, 200);
  CHECK(truncate_window(exact, 400).leads == exact.leads);

  CHECK(kind_of([] { truncate_window(record_of(250, 90), 400); }) == ErrorKind::SeriesTooShort);
}

TEST_CASE("truncate_window honours an offset") {
  const auto raw = record_of(500, 300);
  const auto out = truncate_window(raw, 100, 40);
  CHECK(out.leads.cols() == 50);
  CHECK(out.leads(3, 0) == raw.leads(3, 40));
  CHECK(kind_of([&] { truncate_window(raw, 400, 150); }) == ErrorKind::SeriesTooShort);
}

TEST_CASE("truncate_window output length is floor(window * rate / 1000)") {
  for (int rate : {100, 250, 360, 500, 1000}) {
    for (double ms : {10.0, 33.3, 100.0, 250.5, 400.0}) {
      const auto expected = static_cast<Eigen::Index>(std::floor(ms * rate / 1000.0 + 1e-9));
      if (expected == 0) continue;
      const auto out = truncate_window(record_of(rate, 1000), ms);
      CHECK(out.leads.cols() == expected);
    }
  }
}

TEST_CASE("validate rejects malformed records") {
  auto r = record_of(500, 10);
  r.leads(2, 3) = std::nan("");
  CHECK(kind_of([&] { validate(r); }) == ErrorKind::NonFinite);
  EcgRecord wrong = record_of(500, 10);
  wrong.leads = Matrix::Zero(11, 10);
  CHECK(kind_of([&] { validate(wrong); }) == ErrorKind::ShapeMismatch);
  CineTrajectory cine{"c", Matrix::Zero(2, 10), 500};
  CHECK(kind_of([&] { validate(cine); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("labels and lead names") {
  CHECK(label_from_string("Normal") == Label::Normal);
  CHECK(label_from_string("Abnormal") == Label::Abnormal);
  CHECK(label_from_int(1) == Label::Abnormal);
  CHECK(kind_of([] { label_from_int(2); }) == ErrorKind::SchemaError);
  CHECK(lead_index("aVF").value() == 5);
  CHECK(lead_index("V6").value() == 11);
  CHECK_FALSE(lead_index("V7").has_value());
}

TEST_CASE("stratified split: 100 patients give 60/20/20 with balanced labels") {
  const auto refs = balanced_patients(100);
  const auto split = stratified_split(refs, {}, 7);
  CHECK(split.train.size() == 60);
  CHECK(split.val.size() == 20);
  CHECK(split.test.size() == 20);
  std::map<std::string, Label> label_of;
  for (const auto& r : refs) label_of[r.case_id] = r.label;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    const double abnormal = static_cast<double>(std::count_if(part->begin(), part->end(), [&](const auto& id) {
      return label_of[id] == Label::Abnormal;
    }));
    CHECK(std::abs(abnormal / static_cast<double>(part->size()) - 0.5) <= 0.02);
  }
}

TEST_CASE("stratified split is deterministic and seed dependent") {
  const auto refs = balanced_patients(40);
  const auto a = stratified_split(refs, {}, 3);
  const auto b = stratified_split(refs, {}, 3);
  const auto c = stratified_split(refs, {}, 4);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK((a.train != c.train || a.test != c.test));
}

TEST_CASE("stratified split is a patient-level partition for many seeds") {
  const auto refs = balanced_patients(30, 3);
  std::map<std::string, std::string> patient_of;
  for (const auto& r : refs) patient_of[r.case_id] = r.patient_id;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto s = stratified_split(refs, {}, seed);
    std::multiset<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == refs.size());
    CHECK(std::set<std::string>(all.begin(), all.end()).size() == refs.size());
    std::map<std::string, int> partition_of_patient;
    int leaks = 0;
    int index = 0;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      for (const auto& id : *part) {
        auto [it, inserted] = partition_of_patient.emplace(patient_of[id], index);
        if (!inserted && it->second != index) ++leaks;
      }
      ++index;
    }
    CHECK(leaks == 0);
  }
}

TEST_CASE("stratified split errors") {
  CHECK(kind_of([] { stratified_split(balanced_patients(4), {}, 0); }) == ErrorKind::InsufficientData);
  CHECK(kind_of([] { stratified_split(balanced_patients(40), {0.5, 0.2, 0.2}, 0); }) == ErrorKind::InvalidConfig);
}
