#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "ecgxai/dataset_io.hpp"
#include "ecgxai/error.hpp"
#include "ecgxai/harness.hpp"

namespace ecgxai {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Representation r) noexcept {
  switch (r) {
    case Representation::Ecg12: return "ecg12";
    case Representation::CineDirect: return "cine_direct";
    case Representation::CineMapped: return "cine_mapped";
  }
  return "ecg12";
}

Representation representation_from_string(std::string_view text) {
  if (text == "ecg12") return Representation::Ecg12;
  if (text == "cine_direct") return Representation::CineDirect;
  if (text == "cine_mapped") return Representation::CineMapped;
  throw Error(ErrorKind::InvalidConfig, "unknown representation '" + std::string(text) + "'");
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoError, "sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

// ---- config ----------------------------------------------------------------------

PoolConfig pool_config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "pool config must be a JSON object");
  auto path_of = [&](const json& v) {
    fs::path p = v.get<std::string>();
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  PoolConfig c;
  try {
    for (const auto& m : j.at("methods")) c.methods.push_back(attribution_method_from_string(m.get<std::string>()));
    for (const auto& p : j.at("preps")) c.preps.push_back(prep_from_string(p.get<std::string>()));
    for (const auto& r : j.at("representations")) {
      c.representations.push_back(representation_from_string(r.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.bootstrap_B = j.value("bootstrap_B", c.bootstrap_B);
    c.alpha = j.value("alpha", c.alpha);
    c.data = path_of(j.at("data"));
    c.annotations = path_of(j.at("annotations"));
    if (j.contains("baselines")) c.baselines = path_of(j.at("baselines"));
    if (j.contains("checkpoints")) {
      const auto& ck = j.at("checkpoints");
      if (ck.contains("ecg12")) c.checkpoint_ecg12 = path_of(ck.at("ecg12"));
      if (ck.contains("cine")) c.checkpoint_cine = path_of(ck.at("cine"));
    }
    if (j.contains("cache_dir")) c.cache_dir = path_of(j.at("cache_dir"));
    if (j.contains("method_params")) {
      const auto& mp = j.at("method_params");
      for (auto method : {AttributionMethod::IntegratedGradients, AttributionMethod::GradientShap,
                          AttributionMethod::KernelShap, AttributionMethod::Lime}) {
        const std::string key(to_string(method));
        if (mp.contains(key)) c.params = attribution_params_from_json(method, mp.at(key), c.params);
      }
    }
    c.threads = j.value("threads", c.threads);
    c.window_ms = j.value("window_ms", c.window_ms);
    if (j.contains("cases")) c.cases = j.at("cases").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  validate(c);
  return c;
}

void validate(const PoolConfig& c) {
  if (c.methods.empty()) throw Error(ErrorKind::InvalidConfig, "methods is empty");
  if (c.preps.empty()) throw Error(ErrorKind::InvalidConfig, "preps is empty");
  if (c.representations.empty()) throw Error(ErrorKind::InvalidConfig, "representations is empty");
  if (c.seeds.empty()) throw Error(ErrorKind::InvalidConfig, "seeds is empty");
  if (c.bootstrap_B == 0) throw Error(ErrorKind::InvalidConfig, "bootstrap_B must be positive");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw Error(ErrorKind::InvalidConfig, "alpha must be in (0, 1)");
  if (!(c.window_ms > 0.0)) throw Error(ErrorKind::InvalidConfig, "window_ms must be positive");
  if (c.threads == 0) throw Error(ErrorKind::InvalidConfig, "threads must be >= 1");
}

// ---- inputs ----------------------------------------------------------------------

LoadedModel make_loaded_model(ResNet1d model) {
  const std::string digest = sha256_hex(checkpoint_to_json(model).dump());
  return {std::make_shared<const ResNet1d>(std::move(model)), digest};
}

LoadedReference make_loaded_reference(std::vector<Matrix> baselines) {
  std::string bytes;
  for (const auto& b : baselines) bytes += matrix_to_json(b).dump();
  return {make_reference_set(std::move(baselines)), sha256_hex(bytes)};
}

PoolInputs load_pool_inputs(const PoolConfig& config) {
  PoolInputs in;
  Dataset raw = load_dataset(config.data);
  for (const auto& c : raw) {
    if (!config.cases.empty() && std::find(config.cases.begin(), config.cases.end(), c.ecg.case_id) == config.cases.end()) {
      continue;
    }
    in.cases.push_back(truncate_case(c, config.window_ms));
  }
  if (!config.cases.empty() && in.cases.size() != config.cases.size()) {
    throw Error(ErrorKind::InvalidConfig, "some listed cases are not in the dataset");
  }
  in.annotations = load_annotations(config.annotations);
  if (!config.checkpoint_ecg12.empty() && fs::exists(config.checkpoint_ecg12)) {
    in.ecg12 = make_loaded_model(load_checkpoint(config.checkpoint_ecg12));
  }
  if (!config.checkpoint_cine.empty() && fs::exists(config.checkpoint_cine)) {
    in.cine = make_loaded_model(load_checkpoint(config.checkpoint_cine));
  }
  if (!config.baselines.empty()) {
    std::vector<Matrix> ecg;
    std::vector<Matrix> cine;
    bool all_cine = true;
    for (const auto& c : load_dataset(config.baselines)) {
      const Case t = truncate_case(c, config.window_ms);
      ecg.push_back(t.ecg.leads);
      if (t.cine) {
        cine.push_back(t.cine->path);
      } else {
        all_cine = false;
      }
    }
    if (!ecg.empty()) in.ecg_reference = make_loaded_reference(std::move(ecg));
    if (all_cine && !cine.empty()) in.cine_reference = make_loaded_reference(std::move(cine));
  }
  return in;
}

// ---- rows -------------------------------------------------------------------------

json to_json(const PoolRow& row) {
  json j;
  if (row.error) {
    j = {{"case_id", row.result.case_id},
         {"method", row.result.config.method},
         {"prep", row.result.config.prep},
         {"representation", row.result.config.representation},
         {"error", *row.error}};
  } else {
    j = to_json(row.result);
  }
  j["seed"] = row.seed;
  if (row.diagnosis) j["diagnosis"] = to_string(*row.diagnosis);
  if (row.prediction) j["prediction"] = to_string(*row.prediction);
  return j;
}

PoolRow pool_row_from_json(const json& j) {
  PoolRow row;
  try {
    if (j.contains("error")) {
      row.error = j.at("error").get<std::string>();
      row.result.case_id = j.at("case_id").get<std::string>();
      row.result.config = {j.at("method").get<std::string>(), j.at("prep").get<std::string>(),
                           j.at("representation").get<std::string>()};
    } else {
      row.result = alignment_result_from_json(j);
    }
    row.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("diagnosis")) row.diagnosis = label_from_string(j.at("diagnosis").get<std::string>());
    if (j.contains("prediction")) row.prediction = label_from_string(j.at("prediction").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, e.what());
  }
  return row;
}

std::vector<PoolRow> read_results(std::istream& in) {
  std::vector<PoolRow> rows;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(number) + ": " + e.what());
    }
    rows.push_back(pool_row_from_json(j));
  }
  return rows;
}

std::string results_to_ndjson(std::span<const PoolRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

// ---- run ----------------------------------------------------------------------------

namespace {

enum class Source { Ecg, Cine };

Source source_of(Representation r) { return r == Representation::CineDirect ? Source::Cine : Source::Ecg; }

struct Cell {
  std::size_t slot = 0;
  Representation representation = Representation::Ecg12;
  Prep prep = Prep::Positive;
};

struct Task {
  std::size_t case_index = 0;
  AttributionMethod method = AttributionMethod::IntegratedGradients;
  std::uint64_t seed = 0;
  Source source = Source::Ecg;
  std::vector<Cell> cells;
};

std::optional<json> cache_read(const fs::path& file) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error&) {
    return std::nullopt;  // torn or foreign file: recompute
  }
}

void cache_write(const fs::path& file, const json& value) {
  fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorKind::IoError, "cannot write cache file " + tmp.string());
    out << value.dump();
  }
  fs::rename(tmp, file);
}

const ExpertAnnotation* find_annotation(const std::vector<ExpertAnnotation>& annotations, const std::string& case_id,
                                        AnnotationModality modality) {
  for (const auto& a : annotations) {
    if (a.case_id == case_id && a.modality == modality) return &a;
  }
  return nullptr;
}

AnnotationModality annotation_modality_for(Representation r) {
  return r == Representation::Ecg12 ? AnnotationModality::Ecg12 : AnnotationModality::Cine;
}

Matrix row_matrix(const Eigen::RowVectorXd& v) {
  Matrix m(1, v.size());
  m.row(0) = v;
  return m;
}

class PoolRunner {
 public:
  PoolRunner(const PoolConfig& config, const PoolInputs& inputs) : config_(config), inputs_(inputs) {
    for (const auto& c : inputs_.cases) case_digests_.push_back(sha256_hex(case_to_json(c).dump()));
  }

  PoolOutcome run() {
    plan();
    outcome_.rows.resize(slots_);
    outcome_.stats.cells = slots_;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < tasks_.size(); i = next++) execute(tasks_[i]);
    };
    const std::size_t n_threads = std::min(config_.threads, std::max<std::size_t>(1, tasks_.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    outcome_.stats.cache_hits = hits_;
    outcome_.stats.computed = computed_;
    outcome_.stats.errors = errors_;
    outcome_.stats.attributions_computed = attributions_;
    return std::move(outcome_);
  }

 private:
  // Slots follow the canonical row order; tasks group the cells that share one attribution.
  void plan() {
    std::map<std::tuple<std::size_t, int, std::uint64_t, int>, std::size_t> task_of;
    for (auto rep : config_.representations) {
      for (auto method : config_.methods) {
        for (auto prep : config_.preps) {
          for (std::size_t ci = 0; ci < inputs_.cases.size(); ++ci) {
            for (auto seed : config_.seeds) {
              const auto key = std::make_tuple(ci, static_cast<int>(method), seed, static_cast<int>(source_of(rep)));
              auto it = task_of.find(key);
              if (it == task_of.end()) {
                it = task_of.emplace(key, tasks_.size()).first;
                tasks_.push_back({ci, method, seed, source_of(rep), {}});
              }
              tasks_[it->second].cells.push_back({slots_++, rep, prep});
            }
          }
        }
      }
    }
  }

  const LoadedModel* model_for(Source s) const {
    const auto& m = s == Source::Ecg ? inputs_.ecg12 : inputs_.cine;
    return m ? &*m : nullptr;
  }

  const LoadedReference* reference_for(Source s) const {
    const auto& r = s == Source::Ecg ? inputs_.ecg_reference : inputs_.cine_reference;
    return r ? &*r : nullptr;
  }

  json cell_key(const Task& task, const Cell& cell, const ExpertAnnotation* ann) const {
    const auto* model = model_for(task.source);
    const auto* ref = reference_for(task.source);
    return {{"kind", "cell"},
            {"checkpoint", model ? model->digest : ""},
            {"case", case_digests_[task.case_index]},
            {"annotation", ann ? sha256_hex(to_json(*ann).dump()) : ""},
            {"reference", ref ? ref->digest : ""},
            {"method", to_string(task.method)},
            {"params", to_json(task.method, config_.params)},
            {"prep", to_string(cell.prep)},
            {"representation", to_string(cell.representation)},
            {"seed", task.seed},
            {"window_ms", config_.window_ms}};
  }

  fs::path cache_file(const json& key, const char* sub) const {
    return config_.cache_dir / sub / (sha256_hex(key.dump()) + ".json");
  }

  void fail(PoolRow& row, const std::string& message) {
    row.error = message;
    ++errors_;
  }

  ClassAttribution attribution(const Task& task, const Matrix& x, int rate) {
    const auto* model = model_for(task.source);
    const auto* ref = reference_for(task.source);
    const json key = {{"kind", "attribution"},
                      {"checkpoint", model->digest},
                      {"case", case_digests_[task.case_index]},
                      {"source", task.source == Source::Ecg ? "ecg" : "cine"},
                      {"reference", ref ? ref->digest : ""},
                      {"method", to_string(task.method)},
                      {"params", to_json(task.method, config_.params)},
                      {"seed", task.seed}};
    const bool cached = !config_.cache_dir.empty();
    if (cached) {
      if (auto hit = cache_read(cache_file(key, "attributions"))) {
        try {
          return class_attribution_from_json(*hit);
        } catch (const Error&) {
          // stale format: recompute
        }
      }
    }
    const ClassifierProbabilities explained(*model->model);
    const ReferenceSet reference =
        ref ? ref->set : zero_reference(static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols()));
    const auto& case_id = inputs_.cases[task.case_index].ecg.case_id;
    ClassAttribution a = explain(task.method, explained, case_id, x, reference, rate, config_.params, task.seed);
    ++attributions_;
    if (cached) cache_write(cache_file(key, "attributions"), to_json(a));
    return a;
  }

  void execute(const Task& task) {
    const Case& c = inputs_.cases[task.case_index];
    const int rate = c.ecg.sample_rate_hz;
    std::vector<const ExpertAnnotation*> anns;
    std::vector<Cell> pending;
    std::vector<json> keys;
    for (const auto& cell : task.cells) {
      PoolRow& row = outcome_.rows[cell.slot];
      row.result.case_id = c.ecg.case_id;
      row.result.config = {std::string(to_string(task.method)), std::string(to_string(cell.prep)),
                           std::string(to_string(cell.representation))};
      row.seed = task.seed;
      const auto* ann = find_annotation(inputs_.annotations, c.ecg.case_id, annotation_modality_for(cell.representation));
      const json key = cell_key(task, cell, ann);
      if (!config_.cache_dir.empty() && model_for(task.source) && ann) {
        if (auto hit = cache_read(cache_file(key, "cells"))) {
          try {
            row = pool_row_from_json(*hit);
            ++hits_;
            continue;
          } catch (const Error&) {
          }
        }
      }
      anns.push_back(ann);
      pending.push_back(cell);
      keys.push_back(key);
    }
    if (pending.empty()) return;

    const auto* model = model_for(task.source);
    std::optional<ClassAttribution> attr;
    std::optional<Label> prediction;
    std::string shared_error;
    if (!model) {
      shared_error = std::string(to_string(ErrorKind::MissingCheckpoint)) + ": no " +
                     (task.source == Source::Ecg ? "ecg12" : "cine") + " checkpoint";
    } else if (task.source == Source::Cine && !c.cine) {
      shared_error = std::string(to_string(ErrorKind::SchemaError)) + ": case has no trajectory";
    } else if (std::none_of(anns.begin(), anns.end(), [](auto* a) { return a != nullptr; })) {
      // nothing to align against; skip the attribution
    } else {
      try {
        const Matrix& x = task.source == Source::Ecg ? c.ecg.leads : c.cine->path;
        attr = attribution(task, x, rate);
        prediction = predict(*model->model, x);
      } catch (const std::exception& e) {
        shared_error = e.what();
      }
    }

    for (std::size_t i = 0; i < pending.size(); ++i) {
      const Cell& cell = pending[i];
      PoolRow& row = outcome_.rows[cell.slot];
      if (anns[i]) row.diagnosis = anns[i]->diagnosis;
      row.prediction = prediction;
      if (!shared_error.empty()) {
        fail(row, shared_error);
        continue;
      }
      if (!anns[i]) {
        fail(row, std::string(to_string(ErrorKind::MissingAnnotation)) + ": no " +
                      std::string(to_string(annotation_modality_for(cell.representation))) + " annotation");
        continue;
      }
      try {
        row.result = align_cell(*attr, *anns[i], cell, rate, row.result.config);
        ++computed_;
        if (!config_.cache_dir.empty()) cache_write(cache_file(keys[i], "cells"), to_json(row));
      } catch (const std::exception& e) {
        fail(row, e.what());
      }
    }
  }

  AlignmentResult align_cell(const ClassAttribution& attr, const ExpertAnnotation& ann, const Cell& cell, int rate,
                             const AlignConfig& config) const {
    const BinaryMask mask = annotation_to_mask(ann, rate, config_.window_ms);
    const BipolarProfile phi = bipolar_profile(attr);
    Matrix profile;
    CellMask truth;
    CellMask region;
    switch (cell.representation) {
      case Representation::Ecg12:
        profile = phi.values;
        truth = mask.cells;
        region = mask.region();
        break;
      case Representation::CineDirect:
        profile = phi.values;
        truth = mask.cells.replicate(profile.rows(), 1);
        region = CellMask::Constant(profile.rows(), profile.cols(), true);
        break;
      case Representation::CineMapped:
        profile = row_matrix(map_to_cine(phi).temporal);
        truth = mask.cells;
        region = mask.region();
        break;
    }
    if (profile.cols() != truth.cols()) {
      throw Error(ErrorKind::ShapeMismatch, "annotation window does not match the attribution length");
    }
    const Matrix oriented = orient_by_diagnosis(profile, ann.diagnosis);
    const ImportanceMap map = post_process(oriented, cell.prep, region, *ann.diagnosis);
    return align_case(attr.case_id, map, truth, region, config);
  }

  const PoolConfig& config_;
  const PoolInputs& inputs_;
  std::vector<std::string> case_digests_;
  std::vector<Task> tasks_;
  std::size_t slots_ = 0;
  PoolOutcome outcome_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> computed_{0};
  std::atomic<std::size_t> errors_{0};
  std::atomic<std::size_t> attributions_{0};
};

}  // namespace

PoolOutcome run_pool(const PoolConfig& config, const PoolInputs& inputs) {
  validate(config);
  return PoolRunner(config, inputs).run();
}

}  // namespace ecgxai
