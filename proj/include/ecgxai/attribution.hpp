#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ecgxai/resnet1d.hpp"
#include "ecgxai/signal.hpp"

namespace ecgxai {

// A model explained by the attributors: maps a [N][C][T] batch to per-class scores
// [N][K]. Gradient-based methods additionally need input gradients.
class ExplainedModel {
 public:
  virtual ~ExplainedModel() = default;

  virtual std::size_t num_classes() const = 0;
  virtual ad::Tensor outputs(const ad::Tensor& batch) const = 0;
  // grads[j] = d(sum_n outputs[n][classes[j]]) / d batch. Rows of a batch are
  // independent, so this is the per-sample input gradient.
  virtual std::vector<ad::Tensor> input_gradients(const ad::Tensor& batch, std::span<const std::size_t> classes) const;
};

// Softmax probabilities of a trained classifier (inference mode).
class ClassifierProbabilities final : public ExplainedModel {
 public:
  explicit ClassifierProbabilities(const ResNet1d& model) : model_(&model) {}

  std::size_t num_classes() const override { return model_->config().num_classes; }
  ad::Tensor outputs(const ad::Tensor& batch) const override;
  std::vector<ad::Tensor> input_gradients(const ad::Tensor& batch, std::span<const std::size_t> classes) const override;

 private:
  const ResNet1d* model_;
};

// f_k(x) = sum(weights[k] .* x) + bias[k]
class LinearModel final : public ExplainedModel {
 public:
  LinearModel(std::vector<Matrix> weights, std::vector<double> bias);

  std::size_t num_classes() const override { return weights_.size(); }
  ad::Tensor outputs(const ad::Tensor& batch) const override;
  std::vector<ad::Tensor> input_gradients(const ad::Tensor& batch, std::span<const std::size_t> classes) const override;

 private:
  std::vector<Matrix> weights_;
  std::vector<double> bias_;
};

// Forward-only model built from a per-sample scoring function.
class FunctionModel final : public ExplainedModel {
 public:
  using Fn = std::function<std::vector<double>(const Matrix&)>;
  FunctionModel(std::size_t num_classes, Fn fn) : num_classes_(num_classes), fn_(std::move(fn)) {}

  std::size_t num_classes() const override { return num_classes_; }
  ad::Tensor outputs(const ad::Tensor& batch) const override;

 private:
  std::size_t num_classes_;
  Fn fn_;
};

enum class AttributionMethod { IntegratedGradients, GradientShap, KernelShap, Lime };

std::string_view to_string(AttributionMethod method) noexcept;
AttributionMethod attribution_method_from_string(std::string_view text);

enum class IgBaseline { Zeros, ReferenceMean };

struct IgParams {
  std::size_t steps = 50;
  std::size_t noise_samples = 40;
  double noise_sigma = 0.15;
  IgBaseline baseline = IgBaseline::Zeros;
};

struct GradShapParams {
  std::size_t n_samples = 50;
  double noise_sigma = 0.0;
};

struct KernelShapParams {
  std::size_t budget = 100;
  // Width of the contiguous per-channel time segments forming one feature. Zero picks
  // the smallest multiple of 25 ms whose feature count fits the budget.
  double segment_ms = 0.0;
};

struct LimeParams {
  std::size_t n_perturb = 500;
  // Zero selects 0.75 * sqrt(number of features).
  double kernel_width = 0.0;
};

struct AttributionParams {
  IgParams ig;
  GradShapParams gradshap;
  KernelShapParams kernelshap;
  LimeParams lime;
};

nlohmann::json to_json(AttributionMethod method, const AttributionParams& params);
// Reads the parameters of one method from a flat JSON object, keeping defaults for absent keys.
AttributionParams attribution_params_from_json(AttributionMethod method, const nlohmann::json& j,
                                               AttributionParams defaults = {});

// Reference distribution of Normal inputs; `background` is its per-cell mean.
struct ReferenceSet {
  std::vector<Matrix> baselines;
  Matrix background;
};

ReferenceSet make_reference_set(std::vector<Matrix> baselines);
// Background only, for masking-based methods when no reference cohort is available.
ReferenceSet zero_reference(std::size_t channels, std::size_t samples);

// A[c][t][k] stored as one C x T matrix per class.
struct ClassAttribution {
  std::string case_id;
  AttributionMethod method = AttributionMethod::IntegratedGradients;
  std::vector<Matrix> per_class;
  nlohmann::json params;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const ClassAttribution& a);
ClassAttribution class_attribution_from_json(const nlohmann::json& j);

// Midpoint Riemann sum of the path integral of dF_k/dx from baseline to x, times
// (x - baseline). With noise_samples > 1 the result is averaged over inputs
// x + N(0, sigma^2). One matrix per requested class.
std::vector<Matrix> integrated_gradients(const ExplainedModel& model, const Matrix& x, const Matrix& baseline,
                                         const IgParams& params, std::span<const std::size_t> classes,
                                         std::uint64_t seed);
Matrix integrated_gradients(const ExplainedModel& model, const Matrix& x, const Matrix& baseline,
                            const IgParams& params, std::size_t target_class, std::uint64_t seed);

// Monte-Carlo expected gradients over baselines drawn from the reference set.
std::vector<Matrix> gradient_shap(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                                  const GradShapParams& params, std::span<const std::size_t> classes,
                                  std::uint64_t seed);
Matrix gradient_shap(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                     const GradShapParams& params, std::size_t target_class, std::uint64_t seed);

// Feature groups used by KernelSHAP: contiguous time segments of each channel.
struct FeatureGroups {
  std::size_t channels = 0;
  std::size_t samples = 0;
  std::size_t segment = 0;  // samples per segment
  std::size_t per_channel = 0;
  std::size_t count() const { return channels * per_channel; }
};

FeatureGroups kernel_shap_groups(std::size_t channels, std::size_t samples, int sample_rate_hz,
                                 const KernelShapParams& params);

// Shapley-kernel weighted regression over coalitions of feature groups. Masked
// groups take the background values. When the budget covers every coalition they
// are enumerated exactly; otherwise coalitions are sampled from the Shapley kernel
// with paired complements. Group values are spread uniformly over member cells.
std::vector<Matrix> kernel_shap(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                                int sample_rate_hz, const KernelShapParams& params,
                                std::span<const std::size_t> classes, std::uint64_t seed);
Matrix kernel_shap(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference, int sample_rate_hz,
                   const KernelShapParams& params, std::size_t target_class, std::uint64_t seed);

// Same regression on explicit groups, returning one value per group and class.
std::vector<std::vector<double>> kernel_shap_group_values(const ExplainedModel& model, const Matrix& x,
                                                          const Matrix& background, const FeatureGroups& groups,
                                                          std::size_t budget, std::span<const std::size_t> classes,
                                                          std::uint64_t seed);

struct LimeResult {
  std::vector<std::vector<double>> coefficients;  // [class][time step]
  std::vector<double> intercepts;
  std::vector<Matrix> cells;  // coefficients spread over channels
};

// Local linear surrogate over binary time-step features (a feature switches all
// channels of one time step to the background), fitted by weighted least squares
// with exponential-kernel locality weights.
LimeResult lime_explain(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                        const LimeParams& params, std::span<const std::size_t> classes, std::uint64_t seed);
Matrix lime_explain(const ExplainedModel& model, const Matrix& x, const ReferenceSet& reference,
                    const LimeParams& params, std::size_t target_class, std::uint64_t seed);

// Runs one method for both classes (k = 0 normal, k = 1 abnormal).
ClassAttribution explain(AttributionMethod method, const ExplainedModel& model, const std::string& case_id,
                         const Matrix& x, const ReferenceSet& reference, int sample_rate_hz,
                         const AttributionParams& params, std::uint64_t seed);

}  // namespace ecgxai
