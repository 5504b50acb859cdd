#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "ecgxai/agreement.hpp"
#include "ecgxai/dataset_io.hpp"
#include "helpers.hpp"

using namespace ecgxai;

namespace {

ExpertAnnotation ecg_annotation(std::vector<Segment> segments, std::vector<std::string> leads = {"II"}) {
  ExpertAnnotation a;
  a.case_id = "c1";
  a.annotator_id = "dr";
  a.modality = AnnotationModality::Ecg12;
  a.diagnosis = Label::Abnormal;
  a.leads = std::move(leads);
  a.segments = std::move(segments);
  return a;
}

Segment interval(double s, double e) { return {s, e, std::nullopt, std::nullopt, false}; }
Segment point(double p) { return {0, 0, p, std::nullopt, false}; }

std::vector<Eigen::Index> true_columns(const BinaryMask& m, Eigen::Index row) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index t = 0; t < m.cells.cols(); ++t)
    if (m.cells(row, t)) out.push_back(t);
  return out;
}

std::vector<Eigen::Index> range(Eigen::Index lo, Eigen::Index hi_inclusive) {
  std::vector<Eigen::Index> v;
  for (Eigen::Index i = lo; i <= hi_inclusive; ++i) v.push_back(i);
  return v;
}

CellMask mask_of(std::initializer_list<int> bits) {
  CellMask m(1, static_cast<Eigen::Index>(bits.size()));
  Eigen::Index i = 0;
  for (int b : bits) m(0, i++) = b != 0;
  return m;
}

// independent product-moment correlation of average ranks
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> ranks_by_counting(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      if (w < v[i]) ++less;
      if (w == v[i]) ++equal;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

}  // namespace

TEST_CASE("interval rasterises inclusive start, exclusive end") {
  const auto m = annotation_to_mask(ecg_annotation({interval(30, 100)}), 500, 400);
  CHECK(m.cells.rows() == 12);
  CHECK(m.cells.cols() == 200);
  CHECK(true_columns(m, 1) == range(15, 49));
  CHECK(m.cells.row(0).count() == 0);
  CHECK(m.selected_leads == std::vector<std::size_t>{1});
}

TEST_CASE("points expand by ten milliseconds each side") {
  const auto m = annotation_to_mask(ecg_annotation({point(200)}), 500, 400);
  CHECK(true_columns(m, 1) == range(95, 104));
}

TEST_CASE("short segments widen to the regional minimum") {
  const auto late = annotation_to_mask(ecg_annotation({interval(160, 170)}), 500, 400);
  CHECK(true_columns(late, 1) == range(70, 94));  // 140..190 ms
  const auto early = annotation_to_mask(ecg_annotation({interval(50, 60)}), 500, 400);
  CHECK(true_columns(early, 1) == range(21, 33));  // 42.5..67.5 ms
  const auto edge = annotation_to_mask(ecg_annotation({interval(395, 398)}), 500, 400);
  CHECK(true_columns(edge, 1) == range(186, 199));  // 371.5..421.5 clipped at 400
}

TEST_CASE("out of window segments are rejected") {
  CHECK(kind_of([] { annotation_to_mask(ecg_annotation({interval(410, 420)}), 500, 400); }) == ErrorKind::OutOfWindow);
  CHECK(kind_of([] { annotation_to_mask(ecg_annotation({point(401)}), 500, 400); }) == ErrorKind::OutOfWindow);
}

TEST_CASE("annotation validation") {
  auto no_leads = ecg_annotation({interval(0, 50)}, {});
  CHECK(kind_of([&] { validate(no_leads); }) == ErrorKind::InvalidAnnotation);
  auto bad_lead = ecg_annotation({interval(0, 50)}, {"V9"});
  CHECK(kind_of([&] { validate(bad_lead); }) == ErrorKind::InvalidAnnotation);
  auto reversed = ecg_annotation({interval(60, 50)});
  CHECK(kind_of([&] { validate(reversed); }) == ErrorKind::InvalidAnnotation);
  nlohmann::json j = to_json(ecg_annotation({interval(0, 50)}));
  j.erase("segments");
  CHECK(kind_of([&] { annotation_from_json(j); }) == ErrorKind::SchemaError);
}

TEST_CASE("annotation JSON and file formats") {
  ExpertAnnotation a = ecg_annotation({interval(30, 100), point(250)}, {"I", "V2"});
  a.free_text = "ST elevation";
  const auto back = annotation_from_json(to_json(a));
  CHECK(back.leads == a.leads);
  CHECK(back.segments.size() == 2);
  CHECK(back.segments[1].point_ms.value() == 250.0);
  CHECK(back.free_text == a.free_text);

  ExpertAnnotation cine = a;
  cine.modality = AnnotationModality::Cine;
  cine.leads = {"all"};
  const auto dir = std::filesystem::temp_directory_path();
  write_text_file(dir / "ecgxai_ann_array.json", nlohmann::json::array({to_json(a), to_json(cine)}).dump());
  write_text_file(dir / "ecgxai_ann.ndjson", to_json(a).dump() + "\n" + to_json(cine).dump() + "\n");
  write_text_file(dir / "ecgxai_ann_one.json", to_json(a).dump(2));
  CHECK(load_annotations(dir / "ecgxai_ann_array.json").size() == 2);
  CHECK(load_annotations(dir / "ecgxai_ann.ndjson").size() == 2);
  CHECK(load_annotations(dir / "ecgxai_ann_one.json").size() == 1);

  const auto m = annotation_to_mask(cine, 500, 400);
  CHECK(m.cells.rows() == 1);
  auto expected = range(15, 49);
  for (auto i : range(120, 129)) expected.push_back(i);
  CHECK(true_columns(m, 0) == expected);
}

TEST_CASE("mask round trip is idempotent on random annotations") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ms(0.0, 400.0);
  std::uniform_int_distribution<int> count(1, 4);
  std::uniform_int_distribution<int> lead(0, 11);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> leads;
    for (int i = 0; i < 12; ++i)
      if (coin(rng)) leads.emplace_back(kLeadNames[static_cast<std::size_t>(i)]);
    if (leads.empty()) leads.emplace_back(kLeadNames[static_cast<std::size_t>(lead(rng))]);
    std::vector<Segment> segs;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      if (coin(rng)) {
        segs.push_back(point(ms(rng)));
      } else {
        double a = ms(rng), b = ms(rng);
        if (a > b) std::swap(a, b);
        Segment s = interval(a, b);
        if (coin(rng)) s.leads = std::vector<std::string>{leads.front()};
        segs.push_back(s);
      }
    }
    auto ann = ecg_annotation(segs, leads);
    if (trial % 4 == 0) {
      ann.modality = AnnotationModality::Cine;
      ann.leads = {"all"};
      for (auto& s : ann.segments) s.leads.reset();
    }
    const auto first = annotation_to_mask(ann, 500, 400);
    const auto again = annotation_to_mask(annotation_from_json(to_json(mask_to_annotation(first, 500, ann))), 500, 400);
    CHECK((first.cells == again.cells).all());
    CHECK(first.selected_leads == again.selected_leads);
  }
}

TEST_CASE("dice and iou worked examples") {
  const CellMask region = CellMask::Constant(1, 8, true);
  const auto a = mask_of({1, 1, 1, 1, 0, 0, 0, 0});
  const auto b = mask_of({0, 0, 1, 1, 1, 1, 0, 0});
  CHECK(dice(a, a, region) == 1.0);
  CHECK(iou(a, a, region) == 1.0);
  CHECK(dice(a, b, region) == 0.5);
  CHECK(iou(a, b, region) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto c = mask_of({0, 0, 0, 0, 0, 0, 1, 1});
  CHECK(dice(a, c, region) == 0.0);
  CHECK(iou(a, c, region) == 0.0);
  CHECK(kind_of([&] { dice(a, mask_of({0, 0, 0, 0, 0, 0, 0, 0}), region); }) == ErrorKind::EmptyGroundTruth);
}

TEST_CASE("spearman examples") {
  const std::vector<double> x{1, 2, 2, 3}, y{1, 2, 3, 4};
  const auto r = spearman(x, y);
  CHECK(r.value == doctest::Approx(pearson(ranks_by_counting(x), ranks_by_counting(y))).epsilon(1e-12));
  CHECK(std::round(r.value * 1e4) / 1e4 == doctest::Approx(0.9487));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 1}).value > 0.0);
  const auto flat = spearman(std::vector<double>{5, 5, 5}, std::vector<double>{0, 1, 1});
  CHECK(flat.value == 0.0);
  CHECK(flat.degenerate);
  CHECK(kind_of([] { spearman(std::vector<double>{1, 2}, std::vector<double>{1, 1}); }) == ErrorKind::DegenerateRegion);
}

TEST_CASE("spearman is invariant to monotone transforms of the map") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::bernoulli_distribution coin(0.3);
  Matrix m(3, 30);
  CellMask truth(3, 30);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = n(rng);
    truth.data()[i] = coin(rng);
  }
  truth(0, 0) = true;
  truth(0, 1) = false;
  const CellMask region = CellMask::Constant(3, 30, true);
  const double base = spearman(m, truth, region).value;
  const Matrix transformed = m.array().exp().matrix() * 3.0;
  CHECK(spearman(transformed, truth, region).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("optimal threshold worked examples") {
  Matrix m(1, 4);
  m << 0, 0.2, 0.9, 0.95;
  const auto gt = mask_of({0, 0, 1, 1});
  const CellMask region = CellMask::Constant(1, 4, true);
  const auto r = optimal_threshold(m, gt, region);
  CHECK(r.dice == 1.0);
  CHECK(r.threshold == doctest::Approx(0.21).epsilon(1e-12));

  const auto ones = optimal_threshold(Matrix::Ones(1, 4), mask_of({1, 1, 1, 1}), region);
  CHECK(ones.threshold == 0.0);
  CHECK(ones.dice == 1.0);
}

TEST_CASE("optimal threshold matches an independent grid search") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m(2, 20);
    CellMask gt(2, 20), region(2, 20);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = std::round(u(rng) * 100.0) / 100.0;  // values on the grid exercise the >= boundary
      gt.data()[i] = u(rng) < 0.3;
      region.data()[i] = u(rng) < 0.8;
    }
    gt(0, 0) = true;
    region(0, 0) = true;
    double best = -1.0, best_t = 0.0;
    for (int k = 0; k <= 100; ++k) {
      const double t = k / 100.0;
      double inter = 0, p = 0, g = 0;
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (!region.data()[i]) continue;
        const bool on = m.data()[i] >= t;
        p += on;
        g += gt.data()[i];
        inter += on && gt.data()[i];
      }
      const double d = 2.0 * inter / (p + g);
      if (d > best) {
        best = d;
        best_t = t;
      }
    }
    const auto r = optimal_threshold(m, gt, region);
    CHECK(r.dice == best);
    CHECK(r.threshold == best_t);
    CHECK(r.iou == doctest::Approx(r.dice / (2.0 - r.dice)).epsilon(1e-12));
  }
}

TEST_CASE("align_case identities") {
  Matrix m(1, 6);
  m << 0, 0, 0.7, 1, 0.8, 0;
  const auto gt = mask_of({0, 0, 1, 1, 1, 0});
  const CellMask region = CellMask::Constant(1, 6, true);
  const ImportanceMap map{m, Prep::Scaled, Label::Abnormal, false};
  const AlignConfig cfg{"ig", "scaled", "ecg12"};
  const auto r = align_case("c", map, gt, region, cfg);
  CHECK(r.dice == 1.0);
  CHECK(r.iou == 1.0);
  CHECK(r.spearman > 0.0);
  const ImportanceMap inverted{(1.0 - m.array()).matrix(), Prep::Scaled, Label::Abnormal, false};
  CHECK(align_case("c", inverted, gt, region, cfg).dice <= r.dice);

  const auto back = alignment_result_from_json(to_json(r));
  CHECK(back.dice == r.dice);
  CHECK(back.config.representation == "ecg12");
}

TEST_CASE("metrics ignore cells outside the region") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(12, 30);
  CellMask gt = CellMask::Constant(12, 30, false), region = CellMask::Constant(12, 30, false);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  region.row(3).setConstant(true);
  gt.block(3, 5, 1, 6).setConstant(true);
  const ImportanceMap a{m, Prep::Scaled, Label::Abnormal, false};
  Matrix other = m;
  other.row(7).setConstant(5.0);
  other.row(0).setConstant(-2.0);
  const ImportanceMap b{other, Prep::Scaled, Label::Abnormal, false};
  const AlignConfig cfg{"ig", "scaled", "ecg12"};
  const auto ra = align_case("c", a, gt, region, cfg);
  const auto rb = align_case("c", b, gt, region, cfg);
  CHECK(ra.dice == rb.dice);
  CHECK(ra.spearman == rb.spearman);
  CHECK(ra.threshold == rb.threshold);
}

TEST_CASE("average ranks handle ties") {
  const std::vector<double> v{3, 1, 3, 2};
  CHECK(average_ranks(v) == std::vector<double>{3.5, 1, 3.5, 2});
}
