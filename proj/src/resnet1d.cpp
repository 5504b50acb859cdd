#include "ecgxai/resnet1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "ecgxai/dataset_io.hpp"
#include "ecgxai/error.hpp"

namespace ecgxai {

using nlohmann::json;

void validate(const ModelConfig& c) {
  auto check_conv = [](const ConvSpec& s, const std::string& where) {
    if (s.channels == 0) throw Error(ErrorKind::InvalidConfig, where + ": channels must be positive");
    if (s.kernel == 0 || s.kernel % 2 == 0) throw Error(ErrorKind::InvalidConfig, where + ": kernel must be odd");
    if (s.stride != 1 && s.stride != 2) throw Error(ErrorKind::InvalidConfig, where + ": stride must be 1 or 2");
  };
  if (c.in_channels != kLeadCount && c.in_channels != kSpatialDims) {
    throw Error(ErrorKind::InvalidConfig, "in_channels must be 12 or 3");
  }
  check_conv(c.stem, "stem");
  for (std::size_t i = 0; i < c.blocks.size(); ++i) check_conv(c.blocks[i], "block " + std::to_string(i));
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) throw Error(ErrorKind::InvalidConfig, "dropout_rate must lie in [0,1)");
  if (c.num_classes != 2) throw Error(ErrorKind::InvalidConfig, "num_classes must be 2");
}

namespace {

json conv_to_json(const ConvSpec& s) { return {{"channels", s.channels}, {"kernel", s.kernel}, {"stride", s.stride}}; }

ConvSpec conv_from_json(const json& j) {
  return {j.at("channels").get<std::size_t>(), j.at("kernel").get<std::size_t>(), j.at("stride").get<std::size_t>()};
}

}  // namespace

json to_json(const ModelConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.blocks) blocks.push_back(conv_to_json(b));
  return {{"in_channels", c.in_channels},   {"stem", conv_to_json(c.stem)},   {"blocks", blocks},
          {"dropout_rate", c.dropout_rate}, {"num_classes", c.num_classes}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.in_channels = j.value("in_channels", c.in_channels);
    if (j.contains("stem")) c.stem = conv_from_json(j.at("stem"));
    if (j.contains("blocks")) {
      c.blocks.clear();
      for (const auto& b : j.at("blocks")) c.blocks.push_back(conv_from_json(b));
    }
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.num_classes = j.value("num_classes", c.num_classes);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  validate(c);
  return c;
}

ad::Tensor to_batch(std::span<const Matrix> signals) {
  if (signals.empty()) throw Error(ErrorKind::EmptySet, "empty batch");
  const auto rows = static_cast<std::size_t>(signals.front().rows());
  const auto cols = static_cast<std::size_t>(signals.front().cols());
  ad::Tensor batch({signals.size(), rows, cols});
  for (std::size_t n = 0; n < signals.size(); ++n) {
    const Matrix& m = signals[n];
    if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
      throw Error(ErrorKind::ShapeMismatch, "batch members must share a shape");
    }
    std::copy(m.data(), m.data() + m.size(), batch.ptr() + n * rows * cols);
  }
  return batch;
}

ad::Tensor to_batch(const Matrix& signal) { return to_batch(std::span<const Matrix>(&signal, 1)); }

ResNet1d ResNet1d::build(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  ResNet1d m;
  m.config_ = config;
  std::mt19937_64 rng(seed);

  auto conv_weight = [&](const std::string& name, std::size_t out, std::size_t in, std::size_t k) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in * k));
    std::uniform_real_distribution<double> u(-bound, bound);
    ad::Tensor w({out, in, k});
    for (auto& v : w.data()) v = u(rng);
    m.params_.push_back({name, std::move(w)});
  };
  auto norm = [&](const std::string& name, std::size_t channels) {
    m.params_.push_back({name + ".gamma", ad::Tensor({channels}, 1.0)});
    m.params_.push_back({name + ".beta", ad::Tensor({channels}, 0.0)});
    m.bns_.push_back({name, {ad::Tensor({channels}, 0.0), ad::Tensor({channels}, 1.0)}});
  };

  conv_weight("stem.conv.weight", config.stem.channels, config.in_channels, config.stem.kernel);
  norm("stem.bn", config.stem.channels);
  std::size_t in = config.stem.channels;
  for (std::size_t i = 0; i < config.blocks.size(); ++i) {
    const auto& b = config.blocks[i];
    const std::string p = "block" + std::to_string(i);
    conv_weight(p + ".conv1.weight", b.channels, in, b.kernel);
    norm(p + ".bn1", b.channels);
    conv_weight(p + ".conv2.weight", b.channels, b.channels, b.kernel);
    norm(p + ".bn2", b.channels);
    if (b.stride != 1 || b.channels != in) {
      conv_weight(p + ".shortcut.weight", b.channels, in, 1);
      norm(p + ".shortcut_bn", b.channels);
    }
    in = b.channels;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  ad::Tensor head({config.num_classes, in});
  for (auto& v : head.data()) v = u(rng);
  m.params_.push_back({"head.weight", std::move(head)});
  m.params_.push_back({"head.bias", ad::Tensor({config.num_classes}, 0.0)});
  return m;
}

std::size_t ResNet1d::parameter_index(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw Error(ErrorKind::SchemaError, "no parameter named " + name);
}

void ResNet1d::check_input(const ad::Tensor& batch) const {
  if (batch.rank() != 3) throw Error(ErrorKind::ShapeMismatch, "model input must be [N][C][T]");
  if (batch.dim(1) != config_.in_channels) {
    throw Error(ErrorKind::ChannelMismatch, "model expects " + std::to_string(config_.in_channels) +
                                                " channels, got " + std::to_string(batch.dim(1)));
  }
  if (batch.dim(2) < min_input_length()) {
    throw Error(ErrorKind::SeriesTooShort, "input shorter than " + std::to_string(min_input_length()) + " samples");
  }
}

ResNet1d::Pass ResNet1d::run(const ad::Tensor& batch, bool training, bool input_requires_grad,
                             std::uint64_t dropout_seed, std::uint64_t step, std::vector<NamedBatchNorm>& bns) const {
  check_input(batch);
  Pass pass;
  pass.graph = std::make_unique<ad::Graph>();
  ad::Graph& g = *pass.graph;
  pass.input = g.input(batch, input_requires_grad);
  // Inference passes hold the weights as constants so backward only reaches the input.
  for (const auto& p : params_) pass.params.push_back(training ? g.parameter(p.value) : g.input(p.value, false));

  std::size_t pi = 0;
  std::size_t bi = 0;
  auto next = [&] { return pass.params[pi++]; };
  auto conv_bn = [&](ad::Var x, std::size_t kernel, std::size_t stride) {
    ad::Var w = next();
    ad::Var gamma = next();
    ad::Var beta = next();
    ad::Var y = ad::conv1d(x, w, stride, ad::Padding::replication((kernel - 1) / 2));
    return ad::batch_norm(y, gamma, beta, bns[bi++].state, training);
  };

  ad::Var h = ad::relu(conv_bn(pass.input, config_.stem.kernel, config_.stem.stride));
  std::size_t in = config_.stem.channels;
  for (const auto& b : config_.blocks) {
    ad::Var main = ad::relu(conv_bn(h, b.kernel, b.stride));
    main = conv_bn(main, b.kernel, 1);
    ad::Var skip = h;
    if (b.stride != 1 || b.channels != in) skip = conv_bn(h, 1, b.stride);
    h = ad::relu(ad::add(main, skip));
    in = b.channels;
  }
  ad::Var pooled = ad::global_avg_pool(h);
  pooled = ad::dropout(pooled, config_.dropout_rate, training, dropout_seed, step);
  ad::Var w = next();
  ad::Var bias = next();
  pass.logits = ad::dense(pooled, w, bias);
  return pass;
}

ResNet1d::Pass ResNet1d::forward(const ad::Tensor& batch, bool input_requires_grad) const {
  auto bns = bns_;
  return run(batch, false, input_requires_grad, 0, 0, bns);
}

ResNet1d::Pass ResNet1d::forward_train(const ad::Tensor& batch, std::uint64_t dropout_seed, std::uint64_t step) {
  return run(batch, true, false, dropout_seed, step, bns_);
}

ad::Tensor ResNet1d::logits(const ad::Tensor& batch) const { return forward(batch).logits.value(); }

ad::Tensor ResNet1d::probabilities(const ad::Tensor& batch) const {
  auto pass = forward(batch);
  return ad::softmax(pass.logits).value();
}

// ---- checkpoint ----------------------------------------------------------------

json checkpoint_to_json(const ResNet1d& model) {
  json tensors = json::array();
  for (const auto& p : model.parameters()) {
    tensors.push_back({{"name", p.name}, {"shape", p.value.shape()},
                       {"values", std::vector<double>(p.value.data().begin(), p.value.data().end())}});
  }
  json norms = json::array();
  for (const auto& b : model.batch_norms()) {
    const auto& s = b.state;
    norms.push_back({{"name", b.name},
                     {"running_mean", std::vector<double>(s.running_mean.data().begin(), s.running_mean.data().end())},
                     {"running_var", std::vector<double>(s.running_var.data().begin(), s.running_var.data().end())}});
  }
  return {{"format", "ecgxai-checkpoint"},
          {"version", kCheckpointVersion},
          {"config", to_json(model.config())},
          {"tensors", tensors},
          {"batch_norm", norms}};
}

ResNet1d checkpoint_from_json(const json& j) {
  if (!j.contains("version")) throw Error(ErrorKind::SchemaError, "version");
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw Error(ErrorKind::SchemaError, "unsupported checkpoint version " + j.at("version").dump());
  }
  if (!j.contains("config")) throw Error(ErrorKind::SchemaError, "config");
  ResNet1d model = ResNet1d::build(model_config_from_json(j.at("config")), 0);
  try {
    std::map<std::string, const json*> by_name;
    for (const auto& t : j.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
    for (auto& p : model.parameters()) {
      auto it = by_name.find(p.name);
      if (it == by_name.end()) throw Error(ErrorKind::SchemaError, "missing tensor " + p.name);
      const auto shape = it->second->at("shape").get<ad::Shape>();
      if (shape != p.value.shape()) throw Error(ErrorKind::ShapeMismatch, "tensor " + p.name + " has wrong shape");
      p.value = ad::Tensor(shape, it->second->at("values").get<std::vector<double>>());
    }
    std::map<std::string, const json*> bn_by_name;
    for (const auto& b : j.at("batch_norm")) bn_by_name[b.at("name").get<std::string>()] = &b;
    for (auto& b : model.batch_norms()) {
      auto it = bn_by_name.find(b.name);
      if (it == bn_by_name.end()) throw Error(ErrorKind::SchemaError, "missing batch norm " + b.name);
      const ad::Shape shape = b.state.running_mean.shape();
      b.state.running_mean = ad::Tensor(shape, it->second->at("running_mean").get<std::vector<double>>());
      b.state.running_var = ad::Tensor(shape, it->second->at("running_var").get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, e.what());
  }
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const ResNet1d& model) {
  write_text_file(path, checkpoint_to_json(model).dump() + "\n");
}

ResNet1d load_checkpoint(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

// ---- training ------------------------------------------------------------------

std::string_view to_string(Modality modality) noexcept { return modality == Modality::Ecg ? "ecg" : "cine"; }

Modality modality_from_string(std::string_view text) {
  if (text == "ecg") return Modality::Ecg;
  if (text == "cine") return Modality::Cine;
  throw Error(ErrorKind::InvalidConfig, "modality must be ecg or cine");
}

std::vector<Example> make_examples(const Dataset& dataset, Modality modality) {
  std::vector<Example> out;
  out.reserve(dataset.size());
  for (const auto& c : dataset) {
    if (modality == Modality::Ecg) {
      out.push_back({c.ecg.case_id, c.ecg.leads, c.ecg.label});
    } else {
      if (!c.cine) throw Error(ErrorKind::SchemaError, "case " + c.ecg.case_id + " has no cine trajectory");
      out.push_back({c.ecg.case_id, c.cine->path, c.ecg.label});
    }
  }
  return out;
}

std::vector<Example> select_examples(std::span<const Example> examples, std::span<const std::string> case_ids) {
  std::map<std::string_view, const Example*> by_id;
  for (const auto& e : examples) by_id[e.case_id] = &e;
  std::vector<Example> out;
  out.reserve(case_ids.size());
  for (const auto& id : case_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorKind::SchemaError, "unknown case " + id);
    out.push_back(*it->second);
  }
  return out;
}

json to_json(const TrainOptions& o) {
  return {{"max_epochs", o.max_epochs}, {"patience", o.patience}, {"batch_size", o.batch_size},
          {"lr", o.lr},                 {"val_fraction", o.val_fraction}};
}

TrainOptions train_options_from_json(const json& j) {
  TrainOptions o;
  try {
    o.max_epochs = j.value("max_epochs", o.max_epochs);
    o.patience = j.value("patience", o.patience);
    o.batch_size = j.value("batch_size", o.batch_size);
    o.lr = j.value("lr", o.lr);
    o.val_fraction = j.value("val_fraction", o.val_fraction);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  if (o.max_epochs == 0 || o.batch_size == 0 || !(o.lr > 0.0) || !(o.val_fraction > 0.0 && o.val_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "invalid training options");
  }
  return o;
}

json to_json(const TrainReport& r) {
  return {{"epochs_run", r.epochs_run},       {"best_epoch", r.best_epoch},
          {"best_val_loss", r.best_val_loss}, {"test_accuracy", r.test_accuracy},
          {"test_macro_f1", r.test_macro_f1}, {"seed", r.seed},
          {"val_losses", r.val_losses},       {"best_val_history", r.best_val_history}};
}

namespace {

std::vector<int> labels_of(std::span<const Example> examples, std::span<const std::size_t> idx) {
  std::vector<int> labels;
  labels.reserve(idx.size());
  for (auto i : idx) labels.push_back(static_cast<int>(examples[i].label));
  return labels;
}

ad::Tensor batch_of(std::span<const Example> examples, std::span<const std::size_t> idx) {
  std::vector<Matrix> signals;
  signals.reserve(idx.size());
  for (auto i : idx) signals.push_back(examples[i].signal);
  return to_batch(signals);
}

}  // namespace

double mean_loss(const ResNet1d& model, std::span<const Example> examples, std::size_t batch_size) {
  if (examples.empty()) throw Error(ErrorKind::EmptySet, "no examples to score");
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(examples.size(), start + batch_size); ++i) idx.push_back(i);
    auto pass = model.forward(batch_of(examples, idx));
    const auto labels = labels_of(examples, idx);
    total += ad::softmax_cross_entropy(pass.logits, labels).value().item() * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(examples.size());
}

TrainReport train(ResNet1d& model, std::span<const Example> train_set, std::span<const Example> test_set,
                  std::uint64_t seed, const TrainOptions& options) {
  if (train_set.empty()) throw Error(ErrorKind::EmptySet, "empty training set");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (static_cast<std::size_t>(train_set[i].signal.rows()) != model.config().in_channels) {
      throw Error(ErrorKind::ChannelMismatch, "training example " + train_set[i].case_id + " has wrong channel count");
    }
    by_class[static_cast<std::size_t>(train_set[i].label)].push_back(i);
  }
  if (by_class[0].size() < 2 || by_class[1].size() < 2) {
    throw Error(ErrorKind::SingleClassData, "training needs at least two examples of each class");
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fit_idx;
  std::vector<std::size_t> val_idx;
  for (auto& group : by_class) {
    std::shuffle(group.begin(), group.end(), rng);
    auto n_val = static_cast<std::size_t>(std::lround(options.val_fraction * static_cast<double>(group.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, group.size() - 1);
    val_idx.insert(val_idx.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_val));
    fit_idx.insert(fit_idx.end(), group.begin() + static_cast<std::ptrdiff_t>(n_val), group.end());
  }
  std::sort(val_idx.begin(), val_idx.end());
  std::vector<Example> val_set;
  for (auto i : val_idx) val_set.push_back(train_set[i]);

  TrainReport report;
  report.seed = seed;
  report.best_val_loss = std::numeric_limits<double>::infinity();
  auto best_params = model.parameters();
  auto best_bns = model.batch_norms();

  ad::AdamState adam;
  const ad::AdamOptions adam_options{options.lr};
  std::uint64_t step = 0;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    std::shuffle(fit_idx.begin(), fit_idx.end(), rng);
    for (std::size_t start = 0; start < fit_idx.size(); start += options.batch_size) {
      const std::size_t end = std::min(fit_idx.size(), start + options.batch_size);
      std::span<const std::size_t> idx(fit_idx.data() + start, end - start);
      auto pass = model.forward_train(batch_of(train_set, idx), seed, step++);
      const auto labels = labels_of(train_set, idx);
      ad::Var loss = ad::softmax_cross_entropy(pass.logits, labels);
      pass.graph->backward(loss);
      std::vector<ad::Tensor> values;
      std::vector<ad::Tensor> grads;
      for (std::size_t i = 0; i < pass.params.size(); ++i) grads.push_back(pass.graph->grad(pass.params[i]));
      for (auto& p : model.parameters()) values.push_back(std::move(p.value));
      ad::adam_step(values, grads, adam, adam_options);
      for (std::size_t i = 0; i < values.size(); ++i) model.parameters()[i].value = std::move(values[i]);
    }
    report.epochs_run = epoch;
    const double val_loss = mean_loss(model, val_set);
    report.val_losses.push_back(val_loss);
    if (val_loss < report.best_val_loss) {
      report.best_val_loss = val_loss;
      report.best_epoch = epoch;
      report.best_val_history.push_back(val_loss);
      best_params = model.parameters();
      best_bns = model.batch_norms();
      stale = 0;
    } else if (++stale > options.patience) {
      break;
    }
  }
  model.parameters() = std::move(best_params);
  model.batch_norms() = std::move(best_bns);

  if (!test_set.empty()) {
    const Evaluation ev = evaluate(model, test_set);
    report.test_accuracy = ev.accuracy;
    report.test_macro_f1 = ev.macro_f1;
  }
  return report;
}

std::array<double, 2> predict_proba(const ResNet1d& model, const Matrix& signal) {
  if (static_cast<std::size_t>(signal.rows()) != model.config().in_channels) {
    throw Error(ErrorKind::ChannelMismatch, "model expects " + std::to_string(model.config().in_channels) +
                                                " channels, record has " + std::to_string(signal.rows()));
  }
  const ad::Tensor p = model.probabilities(to_batch(signal));
  return {p[0], p[1]};
}

Label predict(const ResNet1d& model, const Matrix& signal) {
  const auto p = predict_proba(model, signal);
  return p[1] > p[0] ? Label::Abnormal : Label::Normal;
}

Evaluation score_predictions(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.empty()) throw Error(ErrorKind::EmptySet, "no predictions to score");
  if (truth.size() != predicted.size()) throw Error(ErrorKind::ShapeMismatch, "label count mismatch");
  Evaluation ev;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++ev.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  const double n = static_cast<double>(truth.size());
  ev.accuracy = static_cast<double>(ev.confusion[0][0] + ev.confusion[1][1]) / n;
  double f1_sum = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    const double tp = static_cast<double>(ev.confusion[k][k]);
    const double fn = static_cast<double>(ev.confusion[k][1 - k]);
    const double fp = static_cast<double>(ev.confusion[1 - k][k]);
    if (tp + fn > 0.0) f1_sum += 2.0 * tp / (2.0 * tp + fp + fn);
  }
  ev.macro_f1 = f1_sum / 2.0;
  return ev;
}

Evaluation evaluate(const ResNet1d& model, std::span<const Example> test_set) {
  if (test_set.empty()) throw Error(ErrorKind::EmptySet, "empty test set");
  std::vector<Label> truth;
  std::vector<Label> predicted;
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < test_set.size(); start += kBatch) {
    std::vector<std::size_t> idx(std::min(kBatch, test_set.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    for (auto i : idx) {
      if (static_cast<std::size_t>(test_set[i].signal.rows()) != model.config().in_channels) {
        throw Error(ErrorKind::ChannelMismatch, "test example " + test_set[i].case_id + " has wrong channel count");
      }
    }
    const ad::Tensor p = model.probabilities(batch_of(test_set, idx));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      truth.push_back(test_set[idx[j]].label);
      predicted.push_back(p[2 * j + 1] > p[2 * j] ? Label::Abnormal : Label::Normal);
    }
  }
  return score_predictions(truth, predicted);
}

SearchResult random_search(std::span<const Example> train_set, std::span<const Example> val_set,
                           const ModelConfig& base, const TrainOptions& base_options, const SearchSpace& space,
                           std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw Error(ErrorKind::InvalidConfig, "random search needs at least one trial");
  if (val_set.empty()) throw Error(ErrorKind::EmptySet, "random search needs a validation set");
  std::mt19937_64 rng(seed);
  auto pick = [&rng](const auto& options) {
    if (options.empty()) throw Error(ErrorKind::InvalidConfig, "empty search dimension");
    return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
  };
  SearchResult result;
  for (std::size_t t = 0; t < trials; ++t) {
    SearchTrial trial;
    trial.config = base;
    trial.options = base_options;
    trial.config.stem.channels = pick(space.stem_channels);
    const double width = pick(space.width_scale);
    const std::size_t kernel = pick(space.kernel);
    for (auto& b : trial.config.blocks) {
      b.channels = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(b.channels) * width)));
      b.kernel = kernel;
    }
    trial.config.dropout_rate = pick(space.dropout);
    trial.options.lr = pick(space.lr);
    ResNet1d model = ResNet1d::build(trial.config, seed + t);
    train(model, train_set, {}, seed + t, trial.options);
    trial.val_loss = mean_loss(model, val_set);
    if (result.trials.empty() || trial.val_loss < result.trials[result.best].val_loss) result.best = result.trials.size();
    result.trials.push_back(std::move(trial));
  }
  return result;
}

}  // namespace ecgxai
