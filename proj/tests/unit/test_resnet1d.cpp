#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ecgxai/resnet1d.hpp"
#include "ecgxai/synthetic.hpp"
#include "helpers.hpp"

using namespace ecgxai;

namespace {

ModelConfig tiny(std::size_t in_channels = kLeadCount) {
  ModelConfig c;
  c.in_channels = in_channels;
  c.stem = {8, 7, 2};
  c.blocks = {{8, 5, 1}, {12, 3, 2}};
  c.dropout_rate = 0.1;
  return c;
}

std::vector<Example> cohort_examples(int n_each, std::uint64_t seed, Modality m = Modality::Ecg) {
  return make_examples(generate_cohort(n_each, n_each, seed, GeneratorConfig{}), m);
}

}  // namespace

TEST_CASE("forward pass gives one probability pair per example") {
  const auto model = ResNet1d::build(tiny(), 1);
  const auto ex = cohort_examples(2, 0);
  std::vector<Matrix> signals;
  for (const auto& e : ex) signals.push_back(e.signal);
  const auto probs = model.probabilities(to_batch(signals));
  REQUIRE(probs.shape() == ad::Shape{4, 2});
  for (std::size_t n = 0; n < 4; ++n) CHECK(probs[n * 2] + probs[n * 2 + 1] == doctest::Approx(1.0));
}

TEST_CASE("build is deterministic per seed") {
  const auto a = ResNet1d::build(tiny(), 5);
  const auto b = ResNet1d::build(tiny(), 5);
  const auto c = ResNet1d::build(tiny(), 6);
  CHECK(a.parameters().front().value == b.parameters().front().value);
  CHECK(a.parameters().front().value != c.parameters().front().value);
}

TEST_CASE("inputs are checked") {
  const auto model = ResNet1d::build(tiny(), 1);
  CHECK(kind_of([&] { model.logits(ad::Tensor({1, 3, 50}, 0.0)); }) == ErrorKind::ChannelMismatch);
  CHECK(kind_of([&] { model.logits(ad::Tensor({12, 50}, 0.0)); }) == ErrorKind::ShapeMismatch);
  // short inputs still run thanks to replication padding
  CHECK(model.logits(ad::Tensor({1, 12, 3}, 0.5)).shape() == ad::Shape{1, 2});
}

TEST_CASE("config validation") {
  auto even = tiny();
  even.stem.kernel = 4;
  CHECK(kind_of([&] { validate(even); }) == ErrorKind::InvalidConfig);
  auto drop = tiny();
  drop.dropout_rate = 1.0;
  CHECK(kind_of([&] { validate(drop); }) == ErrorKind::InvalidConfig);
  CHECK(model_config_from_json(to_json(tiny(3))) == tiny(3));
}

TEST_CASE("checkpoint round trip preserves predictions") {
  auto model = ResNet1d::build(tiny(), 2);
  const auto ex = cohort_examples(3, 40);
  TrainOptions opt;
  opt.max_epochs = 2;
  train(model, ex, {}, 3, opt);
  const auto path = std::filesystem::temp_directory_path() / "ecgxai_test_ckpt.json";
  save_checkpoint(path, model);
  const auto back = load_checkpoint(path);
  for (const auto& e : ex) {
    const auto p = predict_proba(model, e.signal);
    const auto q = predict_proba(back, e.signal);
    CHECK(p[0] == q[0]);
    CHECK(p[1] == q[1]);
  }
  auto j = checkpoint_to_json(model);
  j["version"] = 99;
  CHECK(kind_of([&] { checkpoint_from_json(j); }) == ErrorKind::SchemaError);
  j.erase("version");
  CHECK(kind_of([&] { checkpoint_from_json(j); }) == ErrorKind::SchemaError);
}

TEST_CASE("score_predictions worked example") {
  const std::vector<Label> truth{Label::Normal, Label::Normal, Label::Abnormal, Label::Abnormal};
  const std::vector<Label> pred{Label::Normal, Label::Abnormal, Label::Abnormal, Label::Abnormal};
  const auto ev = score_predictions(truth, pred);
  CHECK(ev.accuracy == doctest::Approx(0.75));
  // F1(normal) = 2/3, F1(abnormal) = 0.8
  CHECK(ev.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0));
  CHECK(ev.confusion[0][1] == 1);
  CHECK(ev.confusion[1][1] == 2);

  const std::vector<Label> all_normal(4, Label::Normal);
  const auto skew = score_predictions(truth, all_normal);
  CHECK(skew.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.0) / 2.0));
}

TEST_CASE("training needs both classes and valid options") {
  auto model = ResNet1d::build(tiny(), 1);
  auto ex = make_examples(generate_cohort(6, 0, 1, GeneratorConfig{}), Modality::Ecg);
  CHECK(kind_of([&] { train(model, ex, {}, 0, TrainOptions{}); }) == ErrorKind::SingleClassData);
  CHECK(kind_of([] { train_options_from_json({{"batch_size", 0}}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { train_options_from_json({{"lr", -1.0}}); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("training separates the synthetic cohort and is reproducible") {
  const auto train_ex = cohort_examples(30, 100);
  const auto test_ex = cohort_examples(10, 500);
  TrainOptions opt;
  opt.max_epochs = 25;
  opt.lr = 3e-3;
  opt.batch_size = 16;
  auto a = ResNet1d::build(tiny(), 7);
  auto b = ResNet1d::build(tiny(), 7);
  const auto ra = train(a, train_ex, test_ex, 11, opt);
  const auto rb = train(b, train_ex, test_ex, 11, opt);
  CHECK(ra.val_losses == rb.val_losses);
  CHECK(ra.test_accuracy == rb.test_accuracy);
  CHECK(ra.test_accuracy >= 0.8);
  CHECK(ra.best_epoch >= 1);
  CHECK(ra.best_epoch <= ra.epochs_run);
  // restored parameters reproduce the best validation loss history
  for (std::size_t i = 1; i < ra.best_val_history.size(); ++i) {
    CHECK(ra.best_val_history[i] < ra.best_val_history[i - 1]);
  }
  CHECK(ra.best_val_loss == ra.best_val_history.back());
}

TEST_CASE("early stopping halts after patience stale epochs") {
  const auto ex = cohort_examples(10, 300);
  TrainOptions opt;
  opt.max_epochs = 200;
  opt.patience = 1;
  opt.lr = 0.3;  // unstable on purpose
  auto model = ResNet1d::build(tiny(), 1);
  const auto r = train(model, ex, {}, 0, opt);
  CHECK(r.epochs_run < 200);
  CHECK(r.epochs_run - r.best_epoch == opt.patience + 1);
}

TEST_CASE("cine models take three channels") {
  auto model = ResNet1d::build(tiny(3), 1);
  const auto ex = cohort_examples(2, 0, Modality::Cine);
  CHECK(ex.front().signal.rows() == 3);
  CHECK(predict_proba(model, ex.front().signal)[0] > 0.0);
}
