#include "ecgxai/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ecgxai/error.hpp"

namespace ecgxai {

using nlohmann::json;

namespace {

constexpr std::size_t kChunk = 64;
constexpr std::array<std::size_t, 2> kBothClasses{0, 1};

Matrix slice(const ad::Tensor& batch, std::size_t n) {
  const std::size_t rows = batch.dim(1);
  const std::size_t cols = batch.dim(2);
  Matrix m(rows, cols);
  std::copy(batch.ptr() + n * rows * cols, batch.ptr() + (n + 1) * rows * cols, m.data());
  return m;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + " must match the input shape");
  }
}

// Evaluates outputs for many inputs in bounded chunks: result[i][k].
std::vector<std::vector<double>> evaluate_all(const ExplainedModel& model, const std::vector<Matrix>& inputs) {
  std::vector<std::vector<double>> out;
  out.reserve(inputs.size());
  const std::size_t k = model.num_classes();
  for (std::size_t start = 0; start < inputs.size(); start += kChunk) {
    const std::size_t end = std::min(inputs.size(), start + kChunk);
    const ad::Tensor y = model.outputs(to_batch(std::span<const Matrix>(inputs.data() + start, end - start)));
    for (std::size_t i = 0; i < end - start; ++i) out.emplace_back(y.ptr() + i * k, y.ptr() + (i + 1) * k);
  }
  return out;
}

// Per-sample input gradients for many points, averaged per class with weights
// `scale[i]` applied elementwise to (point i's gradient) before summation.
std::vector<Matrix> weighted_gradient_sum(const ExplainedModel& model, const std::vector<Matrix>& points,
                                          const std::vector<Matrix>& multipliers,
                                          std::span<const std::size_t> classes) {
  const Matrix& first = points.front();
  std::vector<Matrix> acc(classes.size(), Matrix::Zero(first.rows(), first.cols()));
  for (std::size_t start = 0; start < points.size(); start += kChunk) {
    const std::size_t end = std::min(points.size(), start + kChunk);
    const auto grads = model.input_gradients(to_batch(std::span<const Matrix>(points.data() + start, end - start)), classes);
    for (std::size_t j = 0; j < classes.size(); ++j) {
      for (std::size_t i = 0; i < end - start; ++i) {
        acc[j].array() += slice(grads[j], i).array() * multipliers[start + i].array();
      }
    }
  }
  return acc;
}

void check_classes(const ExplainedModel& model, std::span<const std::size_t> classes) {
  if (classes.empty()) throw Error(ErrorKind::InvalidConfig, "no target class requested");
  for (auto k : classes) {
    if (k >= model.num_classes()) throw Error(ErrorKind::ShapeMismatch, "target class out of range");
  }
}

}  // namespace

std::vector<ad::Tensor> ExplainedModel::input_gradients(const ad::Tensor&, std::span<const std::size_t>) const {
  throw Error(ErrorKind::InvalidConfig, "model does not provide input gradients");
}

ad::Tensor ClassifierProbabilities::outputs(const ad::Tensor& batch) const { return model_->probabilities(batch); }

std::vector<ad::Tensor> ClassifierProbabilities::input_gradients(const ad::Tensor& batch,
                                                                 std::span<const std::size_t> classes) const {
  auto pass = model_->forward(batch, true);
  ad::Var probs = ad::softmax(pass.logits);
  std::vector<ad::Tensor> grads;
  for (auto k : classes) {
    pass.graph->backward(ad::column_sum(probs, k));
    grads.push_back(pass.graph->grad(pass.input));
  }
  return grads;
}

LinearModel::LinearModel(std::vector<Matrix> weights, std::vector<double> bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.empty() || bias_.size() != weights_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "linear model needs one weight matrix and bias per class");
  }
}

ad::Tensor LinearModel::outputs(const ad::Tensor& batch) const {
  const std::size_t n = batch.dim(0);
  ad::Tensor y({n, weights_.size()});
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix x = slice(batch, i);
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      require_same_shape(weights_[k], x, "linear model weights");
      y[i * weights_.size() + k] = (weights_[k].array() * x.array()).sum() + bias_[k];
    }
  }
  return y;
}

std::vector<ad::Tensor> LinearModel::input_gradients(const ad::Tensor& batch,
                                                     std::span<const std::size_t> classes) const {
  std::vector<ad::Tensor> grads;
  const std::size_t per = batch.dim(1) * batch.dim(2);
  for (auto k : classes) {
    ad::Tensor g(batch.shape());
    for (std::size_t i = 0; i < batch.dim(0); ++i) std::copy(weights_[k].data(), weights_[k].data() + per, g.ptr() + i * per);
    grads.push_back(std::move(g));
  }
  return grads;
}

ad::Tensor FunctionModel::outputs(const ad::Tensor& batch) const {
  const std::size_t n = batch.dim(0);
  ad::Tensor y({n, num_classes_});
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = fn_(slice(batch, i));
    if (v.size() != num_classes_) throw Error(ErrorKind::ShapeMismatch, "function model returned wrong class count");
    std::copy(v.begin(), v.end(), y.ptr() + i * num_classes_);
  }
  return y;
}

std::string_view to_string(AttributionMethod method) noexcept {
  switch (method) {
    case AttributionMethod::IntegratedGradients: return "ig";
    case AttributionMethod::GradientShap: return "gradshap";
    case AttributionMethod::KernelShap: return "kernelshap";
    case AttributionMethod::Lime: return "lime";
  }
  return "ig";
}

AttributionMethod attribution_method_from_string(std::string_view text) {
  if (text == "ig") return AttributionMethod::IntegratedGradients;
  if (text == "gradshap") return AttributionMethod::GradientShap;
  if (text == "kernelshap") return AttributionMethod::KernelShap;
  if (text == "lime") return AttributionMethod::Lime;
  throw Error(ErrorKind::InvalidConfig, "unknown attribution method '" + std::string(text) + "'");
}

json to_json(AttributionMethod method, const AttributionParams& p) {
  switch (method) {
    case AttributionMethod::IntegratedGradients:
      return {{"steps", p.ig.steps},
              {"noise_samples", p.ig.noise_samples},
              {"noise_sigma", p.ig.noise_sigma},
              {"baseline", p.ig.baseline == IgBaseline::Zeros ? "zeros" : "mean"}};
    case AttributionMethod::GradientShap:
      return {{"n_samples", p.gradshap.n_samples}, {"noise_sigma", p.gradshap.noise_sigma}};
    case AttributionMethod::KernelShap:
      return {{"budget", p.kernelshap.budget}, {"segment_ms", p.kernelshap.segment_ms}};
    case AttributionMethod::Lime:
      return {{"n_perturb", p.lime.n_perturb}, {"kernel_width", p.lime.kernel_width}};
  }
  return json::object();
}

AttributionParams attribution_params_from_json(AttributionMethod method, const json& j, AttributionParams p) {
  if (j.is_null()) return p;
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "attribution params must be a JSON object");
  try {
    switch (method) {
      case AttributionMethod::IntegratedGradients: {
        p.ig.steps = j.value("steps", p.ig.steps);
        p.ig.noise_samples = j.value("noise_samples", p.ig.noise_samples);
        p.ig.noise_sigma = j.value("noise_sigma", p.ig.noise_sigma);
        const std::string baseline = j.value("baseline", std::string(p.ig.baseline == IgBaseline::Zeros ? "zeros" : "mean"));
        if (baseline != "zeros" && baseline != "mean") throw Error(ErrorKind::InvalidConfig, "baseline must be zeros or mean");
        p.ig.baseline = baseline == "zeros" ? IgBaseline::Zeros : IgBaseline::ReferenceMean;
        break;
      }
      case AttributionMethod::GradientShap:
        p.gradshap.n_samples = j.value("n_samples", p.gradshap.n_samples);
        p.gradshap.noise_sigma = j.value("noise_sigma", p.gradshap.noise_sigma);
        break;
      case AttributionMethod::KernelShap:
        p.kernelshap.budget = j.value("budget", p.kernelshap.budget);
        p.kernelshap.segment_ms = j.value("segment_ms", p.kernelshap.segment_ms);
        break;
      case AttributionMethod::Lime:
        p.lime.n_perturb = j.value("n_perturb", p.lime.n_perturb);
        p.lime.kernel_width = j.value("kernel_width", p.lime.kernel_width);
        break;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  return p;
}

ReferenceSet make_reference_set(std::vector<Matrix> baselines) {
  if (baselines.empty()) throw Error(ErrorKind::EmptyBaselineSet, "reference set has no records");
  ReferenceSet ref;
  ref.background = Matrix::Zero(baselines.front().rows(), baselines.front().cols());
  for (const auto& b : baselines) {
    require_same_shape(b, ref.background, "reference records");
    ref.background += b;
  }
  ref.background /= static_cast<double>(baselines.size());
  ref.baselines = std::move(baselines);
  return ref;
}

ReferenceSet zero_reference(std::size_t channels, std::size_t samples) {
  return {{}, Matrix::Zero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(samples))};
}

json to_json(const ClassAttribution& a) {
  json values = json::array();
  for (Eigen::Index c = 0; c < a.per_class.front().rows(); ++c) {
    json row = json::array();
    for (Eigen::Index t = 0; t < a.per_class.front().cols(); ++t) {
      json cell = json::array();
      for (const auto& m : a.per_class) cell.push_back(m(c, t));
      row.push_back(std::move(cell));
    }
    values.push_back(std::move(row));
  }
  return {{"case_id", a.case_id}, {"method", to_string(a.method)}, {"params", a.params},
          {"seed", a.seed},       {"values", std::move(values)}};
}

ClassAttribution class_attribution_from_json(const json& j) {
  ClassAttribution a;
  try {
    a.case_id = j.at("case_id").get<std::string>();
    a.method = attribution_method_from_string(j.at("method").get<std::string>());
    a.params = j.value("params", json::object());
    a.seed = j.value("seed", std::uint64_t{0});
    const auto& values = j.at("values");
    const std::size_t channels = values.size();
    const std::size_t samples = channels ? values[0].size() : 0;
    const std::size_t classes = samples ? values[0][0].size() : 0;
    a.per_class.assign(classes, Matrix(channels, samples));
    for (std::size_t c = 0; c < channels; ++c) {
      if (values[c].size() != samples) throw Error(ErrorKind::SchemaError, "ragged attribution values");
      for (std::size_t t = 0; t < samples; ++t) {
        const auto& cell = values[c][t];
        if (cell.size() != classes) throw Error(ErrorKind::SchemaError, "ragged attribution values");
        for (std::size_t k = 0; k < classes; ++k) {
          a.per_class[k](static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = cell[k].get<double>();
        }
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, e.what());
  }
  if (a.per_class.empty()) throw Error(ErrorKind::SchemaError, "values");
  return a;
}

// ---- Integrated Gradients --------------------------------------------------------

std::vector<Matrix> integrated_gradients(const ExplainedModel& model, const Matrix& x, const Matrix& baseline,
                                         const IgParams& params, std::span<const std::size_t> classes,
                                         std::uint64_t seed) {
  require_same_shape(baseline, x, "baseline");
  check_classes(model, classes);
  if (params.steps == 0) throw Error(ErrorKind::InvalidConfig, "steps must be >= 1");
  if (!(params.noise_sigma >= 0.0)) throw Error(ErrorKind::InvalidConfig, "noise_sigma must be >= 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, params.noise_sigma > 0.0 ? params.noise_sigma : 1.0);
  const bool noisy = params.noise_samples > 1 && params.noise_sigma > 0.0;
  const std::size_t repeats = std::max<std::size_t>(1, params.noise_samples);

  std::vector<Matrix> total(classes.size(), Matrix::Zero(x.rows(), x.cols()));
  std::vector<Matrix> points(params.steps);
  for (std::size_t r = 0; r < repeats; ++r) {
    Matrix xr = x;
    if (noisy) xr = xr.unaryExpr([&](double v) { return v + gauss(rng); });
    const Matrix diff = xr - baseline;
    for (std::size_t j = 0; j < params.steps; ++j) {
      const double alpha = (static_cast<double>(j) + 0.5) / static_cast<double>(params.steps);
      points[j] = baseline + alpha * diff;
    }
    const std::vector<Matrix> ones(params.steps, Matrix::Ones(x.rows(), x.cols()));
    const auto grad_sum = weighted_gradient_sum(model, points, ones, classes);
    for (std::size_t k = 0; k < classes.size(); ++k) {
      total[k].array() += diff.array() * grad_sum[k].array() / static_cast<double>(params.steps);
    }
  }
  for (auto& m : total) m /= static_cast<double>(repeats);
  return total;
}

Matrix integrated_gradients(const ExplainedModel& model, const Matrix& x, const Matrix& baseline,
                            const IgParams& params, std::size_t target_class, std::uint64_t seed) {
  return integrated_gradients(model, x, baseline, params, std::span<const std::size_t>(&target_class, 1), seed).front();
}

// ---- GradientSHAP ------------------------------------------------------------------

std::vector<Matrix> gradient_shap(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                                  const GradShapParams& params, std::span<const std::size_t> classes,
                                  std::uint64_t seed) {
  if (reference.baselines.empty()) throw Error(ErrorKind::EmptyBaselineSet, "GradientSHAP needs reference records");
  for (const auto& b : reference.baselines) require_same_shape(b, x, "reference records");
  check_classes(model, classes);
  if (params.n_samples == 0) throw Error(ErrorKind::InvalidConfig, "n_samples must be >= 1");
  if (!(params.noise_sigma >= 0.0)) throw Error(ErrorKind::InvalidConfig, "noise_sigma must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, reference.baselines.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, params.noise_sigma > 0.0 ? params.noise_sigma : 1.0);

  std::vector<Matrix> points;
  std::vector<Matrix> diffs;
  points.reserve(params.n_samples);
  diffs.reserve(params.n_samples);
  for (std::size_t i = 0; i < params.n_samples; ++i) {
    const Matrix& b = reference.baselines[pick(rng)];
    const double alpha = unit(rng);
    Matrix point = b + alpha * (x - b);
    if (params.noise_sigma > 0.0) point = point.unaryExpr([&](double v) { return v + gauss(rng); });
    points.push_back(std::move(point));
    diffs.push_back(x - b);
  }
  auto total = weighted_gradient_sum(model, points, diffs, classes);
  for (auto& m : total) m /= static_cast<double>(params.n_samples);
  return total;
}

Matrix gradient_shap(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                     const GradShapParams& params, std::size_t target_class, std::uint64_t seed) {
  return gradient_shap(model, x, reference, params, std::span<const std::size_t>(&target_class, 1), seed).front();
}

// ---- KernelSHAP ----------------------------------------------------------------------

FeatureGroups kernel_shap_groups(std::size_t channels, std::size_t samples, int sample_rate_hz,
                                 const KernelShapParams& params) {
  if (channels == 0 || samples == 0) throw Error(ErrorKind::ShapeMismatch, "empty input");
  if (sample_rate_hz <= 0) throw Error(ErrorKind::InvalidConfig, "sample_rate_hz must be positive");
  auto groups_for = [&](double ms) {
    FeatureGroups g{channels, samples, 0, 0};
    g.segment = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ms * sample_rate_hz / 1000.0)));
    g.per_channel = (samples + g.segment - 1) / g.segment;
    return g;
  };
  if (params.segment_ms > 0.0) {
    FeatureGroups g = groups_for(params.segment_ms);
    if (g.count() + 2 > params.budget) {
      throw Error(ErrorKind::BudgetTooSmall, std::to_string(g.count()) + " feature groups need a budget of at least " +
                                                 std::to_string(g.count() + 2));
    }
    return g;
  }
  for (double ms = 25.0;; ms += 25.0) {
    FeatureGroups g = groups_for(ms);
    if (g.count() + 2 <= params.budget) return g;
    if (g.per_channel == 1) {
      throw Error(ErrorKind::BudgetTooSmall, "budget " + std::to_string(params.budget) + " cannot cover " +
                                                 std::to_string(channels) + " channels");
    }
  }
}

namespace {

double shapley_kernel_weight(std::size_t m, std::size_t s) {
  // (M - 1) / (C(M, s) * s * (M - s)), with C computed in log space.
  const double log_binom = std::lgamma(m + 1.0) - std::lgamma(s + 1.0) - std::lgamma(m - s + 1.0);
  return static_cast<double>(m - 1) / (std::exp(log_binom) * static_cast<double>(s) * static_cast<double>(m - s));
}

}  // namespace

std::vector<std::vector<double>> kernel_shap_group_values(const ExplainedModel& model, const Matrix& x,
                                                          const Matrix& background, const FeatureGroups& groups,
                                                          std::size_t budget, std::span<const std::size_t> classes,
                                                          std::uint64_t seed) {
  require_same_shape(background, x, "background");
  check_classes(model, classes);
  const std::size_t m = groups.count();
  if (m + 2 > budget) {
    throw Error(ErrorKind::BudgetTooSmall, std::to_string(m) + " features need a budget of at least " +
                                               std::to_string(m + 2));
  }
  auto group_of = [&](Eigen::Index c, Eigen::Index t) {
    return static_cast<std::size_t>(c) * groups.per_channel + static_cast<std::size_t>(t) / groups.segment;
  };
  auto masked = [&](const std::vector<char>& on) {
    Matrix z = background;
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      for (Eigen::Index t = 0; t < x.cols(); ++t) {
        if (on[group_of(c, t)]) z(c, t) = x(c, t);
      }
    }
    return z;
  };

  const auto ends = evaluate_all(model, {x, background});
  std::vector<std::vector<double>> result(classes.size(), std::vector<double>(m, 0.0));
  if (m == 1) {
    for (std::size_t j = 0; j < classes.size(); ++j) result[j][0] = ends[0][classes[j]] - ends[1][classes[j]];
    return result;
  }

  std::vector<std::vector<char>> coalitions;
  std::vector<double> weights;
  const std::size_t samples = budget - 2;
  if (m < 31 && (std::size_t{1} << m) - 2 <= samples) {
    for (std::size_t bits = 1; bits + 1 < (std::size_t{1} << m); ++bits) {
      std::vector<char> on(m);
      std::size_t size = 0;
      for (std::size_t i = 0; i < m; ++i) size += (on[i] = static_cast<char>((bits >> i) & 1U));
      coalitions.push_back(std::move(on));
      weights.push_back(shapley_kernel_weight(m, size));
    }
  } else {
    std::mt19937_64 rng(seed);
    std::vector<double> size_weights;
    for (std::size_t s = 1; s < m; ++s) size_weights.push_back(static_cast<double>(m - 1) / static_cast<double>(s * (m - s)));
    std::discrete_distribution<std::size_t> size_dist(size_weights.begin(), size_weights.end());
    std::vector<std::size_t> order(m);
    while (coalitions.size() < samples) {
      const std::size_t size = size_dist(rng) + 1;
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = 0; i < size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, m - 1);
        std::swap(order[i], order[pick(rng)]);
      }
      std::vector<char> on(m, 0);
      for (std::size_t i = 0; i < size; ++i) on[order[i]] = 1;
      std::vector<char> complement(m);
      for (std::size_t i = 0; i < m; ++i) complement[i] = static_cast<char>(!on[i]);
      coalitions.push_back(std::move(on));
      weights.push_back(1.0);
      if (coalitions.size() < samples) {
        coalitions.push_back(std::move(complement));
        weights.push_back(1.0);
      }
    }
  }

  std::vector<Matrix> inputs;
  inputs.reserve(coalitions.size());
  for (const auto& on : coalitions) inputs.push_back(masked(on));
  const auto y = evaluate_all(model, inputs);

  // Eliminate the last feature through the efficiency constraint sum(phi) = f(x) - f(bg).
  const auto rows = static_cast<Eigen::Index>(coalitions.size());
  const auto cols = static_cast<Eigen::Index>(m - 1);
  Eigen::MatrixXd design(rows, cols);
  Eigen::VectorXd sqrt_w(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& on = coalitions[static_cast<std::size_t>(i)];
    sqrt_w(i) = std::sqrt(weights[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < cols; ++j) {
      design(i, j) = sqrt_w(i) * (static_cast<double>(on[static_cast<std::size_t>(j)]) - static_cast<double>(on[m - 1]));
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> solver(design);
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const std::size_t k = classes[j];
    const double f_empty = ends[1][k];
    const double delta = ends[0][k] - f_empty;
    Eigen::VectorXd rhs(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto& on = coalitions[static_cast<std::size_t>(i)];
      rhs(i) = sqrt_w(i) * (y[static_cast<std::size_t>(i)][k] - f_empty - static_cast<double>(on[m - 1]) * delta);
    }
    const Eigen::VectorXd phi = solver.solve(rhs);
    double partial = 0.0;
    for (Eigen::Index i = 0; i < cols; ++i) {
      result[j][static_cast<std::size_t>(i)] = phi(i);
      partial += phi(i);
    }
    result[j][m - 1] = delta - partial;
  }
  return result;
}

std::vector<Matrix> kernel_shap(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                                int sample_rate_hz, const KernelShapParams& params,
                                std::span<const std::size_t> classes, std::uint64_t seed) {
  const FeatureGroups groups = kernel_shap_groups(static_cast<std::size_t>(x.rows()),
                                                  static_cast<std::size_t>(x.cols()), sample_rate_hz, params);
  const auto values = kernel_shap_group_values(model, x, reference.background, groups, params.budget, classes, seed);
  std::vector<Matrix> out;
  for (const auto& v : values) {
    Matrix cells(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      for (std::size_t s = 0; s < groups.per_channel; ++s) {
        const std::size_t start = s * groups.segment;
        const std::size_t len = std::min(groups.segment, groups.samples - start);
        const double share = v[static_cast<std::size_t>(c) * groups.per_channel + s] / static_cast<double>(len);
        for (std::size_t t = start; t < start + len; ++t) cells(c, static_cast<Eigen::Index>(t)) = share;
      }
    }
    out.push_back(std::move(cells));
  }
  return out;
}

Matrix kernel_shap(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference, int sample_rate_hz,
                   const KernelShapParams& params, std::size_t target_class, std::uint64_t seed) {
  return kernel_shap(model, x, reference, sample_rate_hz, params, std::span<const std::size_t>(&target_class, 1), seed)
      .front();
}

// ---- LIME ----------------------------------------------------------------------------

LimeResult lime_explain(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                        const LimeParams& params, std::span<const std::size_t> classes, std::uint64_t seed) {
  require_same_shape(reference.background, x, "background");
  check_classes(model, classes);
  const auto features = static_cast<std::size_t>(x.cols());
  if (params.n_perturb < features + 1) {
    throw Error(ErrorKind::InvalidConfig, "LIME needs at least " + std::to_string(features + 1) + " perturbations");
  }
  const double width = params.kernel_width > 0.0 ? params.kernel_width : 0.75 * std::sqrt(static_cast<double>(features));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> off_count(1, features);

  const auto n = static_cast<Eigen::Index>(params.n_perturb);
  const auto cols = static_cast<Eigen::Index>(features + 1);
  Eigen::MatrixXd design(n, cols);
  Eigen::VectorXd sqrt_w(n);
  std::vector<Matrix> inputs(params.n_perturb);
  for (int attempt = 0;; ++attempt) {
    std::vector<std::size_t> order(features);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<char> on(features, 1);
      std::size_t off = 0;
      if (i > 0) {
        off = off_count(rng);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t j = 0; j < off; ++j) {
          std::uniform_int_distribution<std::size_t> pick(j, features - 1);
          std::swap(order[j], order[pick(rng)]);
          on[order[j]] = 0;
        }
      }
      Matrix z = x;
      design(i, 0) = 1.0;
      for (std::size_t t = 0; t < features; ++t) {
        design(i, static_cast<Eigen::Index>(t + 1)) = on[t];
        if (!on[t]) z.col(static_cast<Eigen::Index>(t)) = reference.background.col(static_cast<Eigen::Index>(t));
      }
      inputs[static_cast<std::size_t>(i)] = std::move(z);
      // Euclidean distance of the binary vector from the all-on point is sqrt(off).
      sqrt_w(i) = std::sqrt(std::sqrt(std::exp(-static_cast<double>(off) / (width * width))));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> probe(design);
    if (probe.rank() == cols) break;
    if (attempt == 1) throw Error(ErrorKind::DegenerateDesign, "perturbation design is rank deficient");
  }

  const Eigen::MatrixXd weighted = sqrt_w.asDiagonal() * design;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> solver(weighted);
  const auto y = evaluate_all(model, inputs);
  LimeResult result;
  for (auto k : classes) {
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) rhs(i) = sqrt_w(i) * y[static_cast<std::size_t>(i)][k];
    const Eigen::VectorXd beta = solver.solve(rhs);
    result.intercepts.push_back(beta(0));
    std::vector<double> coef(beta.data() + 1, beta.data() + beta.size());
    Matrix cells(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
      cells.col(t).setConstant(coef[static_cast<std::size_t>(t)] / static_cast<double>(x.rows()));
    }
    result.coefficients.push_back(std::move(coef));
    result.cells.push_back(std::move(cells));
  }
  return result;
}

Matrix lime_explain(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                    const LimeParams& params, std::size_t target_class, std::uint64_t seed) {
  return lime_explain(model, x, reference, params, std::span<const std::size_t>(&target_class, 1), seed).cells.front();
}

ClassAttribution explain(AttributionMethod method, const ExplainedModel& model, const std::string& case_id,
                         const Matrix& x, const ReferenceSet& reference, int sample_rate_hz,
                         const AttributionParams& params, std::uint64_t seed) {
  ClassAttribution a;
  a.case_id = case_id;
  a.method = method;
  a.params = to_json(method, params);
  a.seed = seed;
  switch (method) {
    case AttributionMethod::IntegratedGradients: {
      Matrix baseline = Matrix::Zero(x.rows(), x.cols());
      if (params.ig.baseline == IgBaseline::ReferenceMean) {
        if (reference.background.size() == 0) throw Error(ErrorKind::EmptyBaselineSet, "mean baseline needs a reference set");
        require_same_shape(reference.background, x, "reference mean");
        baseline = reference.background;
      }
      a.per_class = integrated_gradients(model, x, baseline, params.ig, kBothClasses, seed);
      break;
    }
    case AttributionMethod::GradientShap:
      a.per_class = gradient_shap(model, x, reference, params.gradshap, kBothClasses, seed);
      break;
    case AttributionMethod::KernelShap:
      a.per_class = kernel_shap(model, x, reference, sample_rate_hz, params.kernelshap, kBothClasses, seed);
      break;
    case AttributionMethod::Lime:
      a.per_class = lime_explain(model, x, reference, params.lime, kBothClasses, seed).cells;
      break;
  }
  return a;
}

}  // namespace ecgxai
