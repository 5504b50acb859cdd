#include "ecgxai/crossmodal.hpp"

#include <cmath>
#include <limits>

#include "ecgxai/error.hpp"

namespace ecgxai {

BipolarProfile bipolar_profile(const ClassAttribution& a) {
  if (a.per_class.size() != 2) throw Error(ErrorKind::ShapeMismatch, "bipolar profile needs both class slices");
  const Matrix& normal = a.per_class[0];
  const Matrix& abnormal = a.per_class[1];
  if (normal.rows() != abnormal.rows() || normal.cols() != abnormal.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "class slices differ in shape");
  }
  return {(abnormal - normal) / 2.0, a.method, a.case_id};
}

MappedProfile map_to_cine(const BipolarProfile& phi) {
  if (phi.values.rows() != static_cast<Eigen::Index>(kLeadCount)) {
    throw Error(ErrorKind::WrongChannelCount, "expected 12 leads, got " + std::to_string(phi.values.rows()));
  }
  MappedProfile out;
  const Eigen::RowVectorXd sums = phi.values.colwise().sum();
  const double peak = sums.size() ? sums.cwiseAbs().maxCoeff() : 0.0;
  if (peak == 0.0) {
    out.temporal = Eigen::RowVectorXd::Zero(sums.size());
    out.degenerate = true;
  } else {
    out.temporal = sums / peak;
  }
  out.replicated = out.temporal.replicate(kSpatialDims, 1);
  return out;
}

Matrix orient_by_diagnosis(const Matrix& phi, std::optional<Label> diagnosis) {
  if (!diagnosis) throw Error(ErrorKind::MissingDiagnosis, "no expert diagnosis for orientation");
  return *diagnosis == Label::Normal ? Matrix(-phi) : phi;
}

std::string_view to_string(Prep prep) noexcept {
  switch (prep) {
    case Prep::Positive: return "positive";
    case Prep::Absolute: return "absolute";
    case Prep::Scaled: return "scaled";
  }
  return "positive";
}

Prep prep_from_string(std::string_view text) {
  if (text == "positive" || text == "Positive") return Prep::Positive;
  if (text == "absolute" || text == "Absolute") return Prep::Absolute;
  if (text == "scaled" || text == "Scaled") return Prep::Scaled;
  throw Error(ErrorKind::InvalidConfig, "unknown prep '" + std::string(text) + "'");
}

ImportanceMap post_process(const Matrix& oriented, Prep prep, const CellMask& region, Label oriented_for) {
  if (region.rows() != oriented.rows() || region.cols() != oriented.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "region shape differs from the profile");
  }
  if (!region.any()) throw Error(ErrorKind::EmptyRegion, "evaluation region has no cells");
  ImportanceMap out;
  out.prep = prep;
  out.oriented_for = oriented_for;
  switch (prep) {
    case Prep::Positive:
      out.values = oriented.cwiseMax(0.0);
      break;
    case Prep::Absolute:
      out.values = oriented.cwiseAbs();
      break;
    case Prep::Scaled: {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (Eigen::Index c = 0; c < oriented.rows(); ++c) {
        for (Eigen::Index t = 0; t < oriented.cols(); ++t) {
          if (!region(c, t)) continue;
          lo = std::min(lo, oriented(c, t));
          hi = std::max(hi, oriented(c, t));
        }
      }
      if (hi > lo) {
        out.values = (oriented.array() - lo) / (hi - lo);
      } else {
        out.values = Matrix::Zero(oriented.rows(), oriented.cols());
        out.constant = true;
      }
      break;
    }
  }
  return out;
}

}  // namespace ecgxai
