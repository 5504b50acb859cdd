#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgxai/autodiff.hpp"
#include "ecgxai/signal.hpp"

namespace ecgxai {

struct ConvSpec {
  std::size_t channels = 32;
  std::size_t kernel = 5;
  std::size_t stride = 1;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct ModelConfig {
  std::size_t in_channels = kLeadCount;
  ConvSpec stem{32, 7, 2};
  std::vector<ConvSpec> blocks{{32, 5, 1}, {64, 5, 2}, {64, 3, 1}};
  double dropout_rate = 0.3;
  std::size_t num_classes = 2;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& config);
nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Converts a C x T matrix into a [1][C][T] tensor, or stacks several into [N][C][T].
ad::Tensor to_batch(std::span<const Matrix> signals);
ad::Tensor to_batch(const Matrix& signal);

// 1D residual network: strided stem conv -> residual blocks with replication
// padding -> global average pooling -> dropout -> dense. No pooling layers.
class ResNet1d {
 public:
  struct NamedTensor {
    std::string name;
    ad::Tensor value;
  };
  struct NamedBatchNorm {
    std::string name;
    ad::BatchNormState state;
  };

  // One forward pass. The graph owns every node; `logits` is [N][num_classes].
  struct Pass {
    std::unique_ptr<ad::Graph> graph;
    std::vector<ad::Var> params;
    ad::Var input;
    ad::Var logits;
  };

  ResNet1d() = default;

  // Scaled-uniform fan-in initialisation, deterministic per seed.
  static ResNet1d build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Smallest input length accepted. Every conv uses replication padding of
  // (kernel - 1) / 2, so any length >= 1 yields at least one output sample.
  std::size_t min_input_length() const { return 1; }

  // Inference-mode pass (running batch-norm statistics, no dropout).
  Pass forward(const ad::Tensor& batch, bool input_requires_grad = false) const;
  // Training-mode pass: batch statistics and dropout; updates running statistics.
  Pass forward_train(const ad::Tensor& batch, std::uint64_t dropout_seed, std::uint64_t step);

  ad::Tensor logits(const ad::Tensor& batch) const;
  ad::Tensor probabilities(const ad::Tensor& batch) const;

  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::vector<NamedBatchNorm>& batch_norms() { return bns_; }
  const std::vector<NamedBatchNorm>& batch_norms() const { return bns_; }

  std::size_t parameter_index(const std::string& name) const;

 private:
  Pass run(const ad::Tensor& batch, bool training, bool input_requires_grad, std::uint64_t dropout_seed,
           std::uint64_t step, std::vector<NamedBatchNorm>& bns) const;
  void check_input(const ad::Tensor& batch) const;

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  std::vector<NamedBatchNorm> bns_;
};

// Parameter checkpoint: JSON manifest with a mandatory version field.
inline constexpr int kCheckpointVersion = 1;
nlohmann::json checkpoint_to_json(const ResNet1d& model);
ResNet1d checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const ResNet1d& model);
ResNet1d load_checkpoint(const std::filesystem::path& path);

// ---- training ------------------------------------------------------------------

struct Example {
  std::string case_id;
  Matrix signal;  // C x T
  Label label = Label::Normal;
};

enum class Modality { Ecg, Cine };
std::string_view to_string(Modality modality) noexcept;
Modality modality_from_string(std::string_view text);

// Examples of one modality; cine requires every case to carry a trajectory.
std::vector<Example> make_examples(const Dataset& dataset, Modality modality);
std::vector<Example> select_examples(std::span<const Example> examples, std::span<const std::string> case_ids);

struct TrainOptions {
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double val_fraction = 0.15;
};

nlohmann::json to_json(const TrainOptions& options);
TrainOptions train_options_from_json(const nlohmann::json& j);

struct Evaluation {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<std::array<std::size_t, 2>, 2> confusion{};  // [true][predicted]
};

struct TrainReport {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_loss = 0.0;
  double test_accuracy = 0.0;
  double test_macro_f1 = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> val_losses;        // per epoch
  std::vector<double> best_val_history;  // val loss of each restored checkpoint, in order
};

nlohmann::json to_json(const TrainReport& report);

// Adam on softmax cross-entropy with a stratified, seeded inner validation split.
// Stops once `patience` consecutive epochs fail to improve validation loss and
// restores the best parameters. Test metrics are filled when test_set is non-empty.
TrainReport train(ResNet1d& model, std::span<const Example> train_set, std::span<const Example> test_set,
                  std::uint64_t seed, const TrainOptions& options);

double mean_loss(const ResNet1d& model, std::span<const Example> examples, std::size_t batch_size = 64);

// Softmax of logits with dropout disabled: (p_normal, p_abnormal).
std::array<double, 2> predict_proba(const ResNet1d& model, const Matrix& signal);
Label predict(const ResNet1d& model, const Matrix& signal);

Evaluation evaluate(const ResNet1d& model, std::span<const Example> test_set);
// Accuracy, macro F1 and confusion from label pairs. Zero-support classes count F1 = 0.
Evaluation score_predictions(std::span<const Label> truth, std::span<const Label> predicted);

// ---- hyperparameter search -----------------------------------------------------

// Grid sampled by random_search. Block widths are multiplied by width_scale.
struct SearchSpace {
  std::vector<std::size_t> stem_channels{16, 32};
  std::vector<double> width_scale{1.0, 2.0};
  std::vector<std::size_t> kernel{3, 5, 7};
  std::vector<double> dropout{0.1, 0.3, 0.5};
  std::vector<double> lr{3e-4, 1e-3, 3e-3};
};

struct SearchTrial {
  ModelConfig config;
  TrainOptions options;
  double val_loss = 0.0;
};

struct SearchResult {
  std::vector<SearchTrial> trials;
  std::size_t best = 0;
};

// Seeded random search: each trial trains on train_set and is scored by
// cross-entropy on val_set.
SearchResult random_search(std::span<const Example> train_set, std::span<const Example> val_set,
                           const ModelConfig& base, const TrainOptions& base_options, const SearchSpace& space,
                           std::size_t trials, std::uint64_t seed);

}  // namespace ecgxai
