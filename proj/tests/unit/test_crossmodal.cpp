#include <doctest.h>

#include <random>

#include "ecgxai/crossmodal.hpp"
#include "helpers.hpp"

using namespace ecgxai;

namespace {

ClassAttribution pair(const Matrix& a0, const Matrix& a1) {
  ClassAttribution a;
  a.case_id = "c";
  a.per_class = {a0, a1};
  return a;
}

BipolarProfile profile(const Matrix& m) { return {m, AttributionMethod::IntegratedGradients, "c"}; }

CellMask all_cells(Eigen::Index r, Eigen::Index c) { return CellMask::Constant(r, c, true); }

}  // namespace

TEST_CASE("bipolar profile arithmetic") {
  Matrix a1(1, 1), a0(1, 1);
  a1 << 0.4;
  a0 << -0.2;
  CHECK(bipolar_profile(pair(a0, a1)).values(0, 0) == doctest::Approx(0.3).epsilon(1e-15));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Matrix r(12, 8);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = n(rng);
  CHECK(bipolar_profile(pair(r, r)).values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(bipolar_profile(pair(-r, r)).values == r);

  ClassAttribution one;
  one.per_class = {r};
  CHECK(kind_of([&] { bipolar_profile(one); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("map_to_cine sums leads and normalises by the peak") {
  Matrix phi = Matrix::Zero(12, 3);
  phi(0, 0) = 1.5;
  phi(4, 0) = 0.5;
  const auto m = map_to_cine(profile(phi));
  CHECK(m.temporal(0) == 1.0);
  CHECK(m.temporal(1) == 0.0);
  CHECK(m.temporal(2) == 0.0);
  CHECK_FALSE(m.degenerate);
  CHECK(m.replicated.rows() == 3);

  const auto z = map_to_cine(profile(Matrix::Zero(12, 5)));
  CHECK(z.degenerate);
  CHECK(z.temporal.cwiseAbs().maxCoeff() == 0.0);

  CHECK(kind_of([] { map_to_cine(profile(Matrix::Ones(3, 5))); }) == ErrorKind::WrongChannelCount);
}

TEST_CASE("map_to_cine is scale invariant with identical rows") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 30; ++trial) {
    Matrix phi(12, 40);
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = n(rng);
    const auto base = map_to_cine(profile(phi));
    CHECK(base.temporal.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
    for (double alpha : {0.5, 2.0, 10.0}) {
      const auto scaled = map_to_cine(profile(alpha * phi));
      CHECK((scaled.temporal - base.temporal).cwiseAbs().maxCoeff() <= 1e-12);
    }
    const auto flipped = map_to_cine(profile(-phi));
    CHECK((flipped.temporal + base.temporal).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(base.replicated.row(0) == base.replicated.row(1));
    CHECK(base.replicated.row(1) == base.replicated.row(2));
    CHECK(base.replicated.row(0) == base.temporal);
  }
}

TEST_CASE("orientation flips normal cases only") {
  Matrix phi(1, 2);
  phi << 0.3, -0.1;
  CHECK(orient_by_diagnosis(phi, Label::Normal)(0, 0) == -0.3);
  CHECK(orient_by_diagnosis(phi, Label::Abnormal) == phi);
  CHECK(orient_by_diagnosis(orient_by_diagnosis(phi, Label::Normal), Label::Normal) == phi);
  CHECK(kind_of([&] { orient_by_diagnosis(phi, std::nullopt); }) == ErrorKind::MissingDiagnosis);
}

TEST_CASE("post-processing worked example") {
  Matrix phi(1, 2);
  phi << -0.5, 0.2;
  const auto region = all_cells(1, 2);
  const auto pos = post_process(phi, Prep::Positive, region, Label::Abnormal).values;
  const auto abs = post_process(phi, Prep::Absolute, region, Label::Abnormal).values;
  const auto sc = post_process(phi, Prep::Scaled, region, Label::Abnormal).values;
  CHECK(pos(0, 0) == 0.0);
  CHECK(pos(0, 1) == 0.2);
  CHECK(abs(0, 0) == 0.5);
  CHECK(abs(0, 1) == 0.2);
  CHECK(sc(0, 0) == 0.0);
  CHECK(sc(0, 1) == 1.0);

  CHECK(post_process(-Matrix::Ones(2, 3), Prep::Positive, all_cells(2, 3), Label::Normal).values.maxCoeff() == 0.0);
  const auto flat = post_process(Matrix::Constant(2, 3, 0.4), Prep::Scaled, all_cells(2, 3), Label::Normal);
  CHECK(flat.constant);
  CHECK(flat.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("post-processing region errors") {
  const Matrix phi = Matrix::Ones(2, 3);
  CHECK(kind_of([&] { post_process(phi, Prep::Scaled, CellMask::Constant(2, 3, false), Label::Normal); }) ==
        ErrorKind::EmptyRegion);
  CHECK(kind_of([&] { post_process(phi, Prep::Scaled, all_cells(3, 3), Label::Normal); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("scaled uses only region cells and preserves order") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Matrix phi(4, 25);
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = n(rng);
  CellMask region = CellMask::Constant(4, 25, false);
  region.row(1).setConstant(true);
  region.row(2).setConstant(true);
  const auto m = post_process(phi, Prep::Scaled, region, Label::Abnormal).values;
  double lo = 1e9, hi = -1e9;
  for (Eigen::Index c = 1; c <= 2; ++c) {
    for (Eigen::Index t = 0; t < 25; ++t) {
      lo = std::min(lo, m(c, t));
      hi = std::max(hi, m(c, t));
    }
  }
  CHECK(lo == 0.0);
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-15));
  for (Eigen::Index a = 25; a < 75; ++a) {
    for (Eigen::Index b = 25; b < 75; ++b) {
      const Eigen::Index ra = a / 25, ta = a % 25, rb = b / 25, tb = b % 25;
      if (phi(ra, ta) < phi(rb, tb)) CHECK(m(ra, ta) < m(rb, tb));
    }
  }
}

TEST_CASE("positive and absolute are idempotent") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  Matrix phi(3, 10);
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = n(rng);
  const auto region = all_cells(3, 10);
  for (Prep p : {Prep::Positive, Prep::Absolute}) {
    const auto once = post_process(phi, p, region, Label::Abnormal).values;
    CHECK(post_process(once, p, region, Label::Abnormal).values == once);
  }
}

TEST_CASE("prep names") {
  for (Prep p : {Prep::Positive, Prep::Absolute, Prep::Scaled}) CHECK(prep_from_string(to_string(p)) == p);
  CHECK(prep_from_string("Scaled") == Prep::Scaled);
  CHECK(kind_of([] { prep_from_string("log"); }) == ErrorKind::InvalidConfig);
}
