// Command-line front end: generate, train, attribute, map, pool, report, export-ui,
// import-annotations. Exit 0 on success, 1 on a hard error, 2 when some pool cells failed.
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ecgxai/agreement.hpp"
#include "ecgxai/attribution.hpp"
#include "ecgxai/crossmodal.hpp"
#include "ecgxai/dataset_io.hpp"
#include "ecgxai/error.hpp"
#include "ecgxai/harness.hpp"
#include "ecgxai/resnet1d.hpp"
#include "ecgxai/synthetic.hpp"

namespace fs = std::filesystem;
using namespace ecgxai;
using nlohmann::json;

namespace {

json parse_json_arg(const std::string& text) {
  if (text.empty()) return json::object();
  if (fs::exists(text)) return json::parse(read_text_file(text));
  return json::parse(text);
}

std::vector<json> read_ndjson(const fs::path& path) {
  std::vector<json> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ParseError, path.string() + " line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

Matrix input_of(const Case& c, std::size_t channels) {
  if (channels == kLeadCount) return c.ecg.leads;
  if (!c.cine) throw Error(ErrorKind::SchemaError, "case " + c.ecg.case_id + " has no trajectory");
  return c.cine->path;
}

// ---- generate -----------------------------------------------------------------------

struct GenerateArgs {
  std::size_t normal = 200;
  std::size_t abnormal = 200;
  std::uint64_t seed = 0;
  std::string kind = "st";
  std::string out;
  std::string annotations;
  std::string baselines;
  std::size_t n_baselines = 150;
};

int run_generate(const GenerateArgs& a) {
  GeneratorConfig cfg;
  if (a.kind == "st") {
    cfg.abnormal_kind = AbnormalKind::StOffset;
  } else if (a.kind == "qrs") {
    cfg.abnormal_kind = AbnormalKind::QrsWidening;
  } else if (a.kind == "mixed") {
    cfg.abnormal_kind = AbnormalKind::Mixed;
  } else {
    throw Error(ErrorKind::InvalidConfig, "kind must be st, qrs or mixed");
  }
  const Dataset cohort = generate_cohort(a.normal, a.abnormal, a.seed, cfg);
  save_dataset(a.out, cohort);
  if (!a.annotations.empty()) {
    json anns = json::array();
    for (const auto& c : cohort) {
      anns.push_back(to_json(annotation_from_truth(c, AnnotationModality::Ecg12)));
      anns.push_back(to_json(annotation_from_truth(c, AnnotationModality::Cine)));
    }
    write_text_file(a.annotations, anns.dump(1) + "\n");
  }
  if (!a.baselines.empty()) {
    // Separate seed range so references never coincide with cohort cases.
    save_dataset(a.baselines, generate_cohort(a.n_baselines, 0, a.seed + 1'000'000, cfg));
  }
  std::cout << json{{"cases", cohort.size()}, {"out", a.out}}.dump() << "\n";
  return 0;
}

// ---- train ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string modality = "ecg";
  std::string config;
  std::uint64_t seed = 0;
  std::string out_checkpoint;
  std::string out_split;
};

int run_train(const TrainArgs& a) {
  const json cfg = parse_json_arg(a.config);
  const Modality modality = modality_from_string(a.modality);
  const double window_ms = cfg.value("window_ms", kDefaultWindowMs);
  ModelConfig model_cfg = cfg.contains("model") ? model_config_from_json(cfg.at("model")) : ModelConfig{};
  model_cfg.in_channels = modality == Modality::Ecg ? kLeadCount : kSpatialDims;
  validate(model_cfg);
  const TrainOptions options = train_options_from_json(cfg.value("train", json::object()));
  const std::size_t search_trials = cfg.value("search_trials", std::size_t{0});

  Dataset dataset;
  for (const auto& c : load_dataset(a.data)) dataset.push_back(truncate_case(c, window_ms));
  const auto refs = case_refs(dataset);
  const DatasetSplit split = stratified_split(refs, {}, a.seed);
  const auto examples = make_examples(dataset, modality);
  const auto train_set = select_examples(examples, split.train);
  const auto val_set = select_examples(examples, split.val);
  const auto test_set = select_examples(examples, split.test);

  TrainOptions chosen = options;
  json search = nullptr;
  if (search_trials > 0) {
    const auto result = random_search(train_set, val_set, model_cfg, options, SearchSpace{}, search_trials, a.seed);
    model_cfg = result.trials[result.best].config;
    chosen = result.trials[result.best].options;
    search = {{"trials", result.trials.size()}, {"best_val_loss", result.trials[result.best].val_loss},
              {"config", to_json(model_cfg)}, {"options", to_json(chosen)}};
  }
  ResNet1d model = ResNet1d::build(model_cfg, a.seed);
  const TrainReport report = train(model, train_set, test_set, a.seed, chosen);
  save_checkpoint(a.out_checkpoint, model);
  if (!a.out_split.empty()) {
    write_text_file(a.out_split, json{{"train", split.train}, {"val", split.val}, {"test", split.test}}.dump(1) + "\n");
  }
  json out = to_json(report);
  if (!search.is_null()) out["search"] = search;
  std::cout << out.dump() << "\n";
  return 0;
}

// ---- attribute ------------------------------------------------------------------------

struct AttributeArgs {
  std::string checkpoint;
  std::string data;
  std::string method;
  std::string params;
  std::uint64_t seed = 0;
  std::string out;
  std::string baselines;
  std::vector<std::string> cases;
  double window_ms = kDefaultWindowMs;
  std::size_t threads = 1;
};

int run_attribute(const AttributeArgs& a) {
  const AttributionMethod method = attribution_method_from_string(a.method);
  const AttributionParams params = attribution_params_from_json(method, parse_json_arg(a.params));
  const ResNet1d model = load_checkpoint(a.checkpoint);
  const std::size_t channels = model.config().in_channels;

  Dataset dataset;
  for (const auto& c : load_dataset(a.data)) {
    if (!a.cases.empty() && std::find(a.cases.begin(), a.cases.end(), c.ecg.case_id) == a.cases.end()) continue;
    dataset.push_back(truncate_case(c, a.window_ms));
  }
  if (dataset.empty()) throw Error(ErrorKind::EmptySet, "no cases to attribute");

  ReferenceSet reference;
  if (!a.baselines.empty()) {
    std::vector<Matrix> refs;
    for (const auto& c : load_dataset(a.baselines)) refs.push_back(input_of(truncate_case(c, a.window_ms), channels));
    reference = make_reference_set(std::move(refs));
  } else {
    const Matrix first = input_of(dataset.front(), channels);
    reference = zero_reference(static_cast<std::size_t>(first.rows()), static_cast<std::size_t>(first.cols()));
  }

  const ClassifierProbabilities explained(model);
  std::vector<std::string> lines(dataset.size());
  std::vector<std::string> errors(dataset.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      try {
        const Case& c = dataset[i];
        const auto attr = explain(method, explained, c.ecg.case_id, input_of(c, channels), reference,
                                  c.ecg.sample_rate_hz, params, a.seed);
        lines[i] = to_json(attr).dump();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::max<std::size_t>(1, a.threads); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string out;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      std::cerr << dataset[i].ecg.case_id << ": " << errors[i] << "\n";
      continue;
    }
    out += lines[i] + "\n";
  }
  write_text_file(a.out, out);
  if (failed == dataset.size()) return 1;
  return failed ? 2 : 0;
}

// ---- map --------------------------------------------------------------------------------

struct MapArgs {
  std::string attributions;
  std::string diagnoses;
  std::string prep;
  std::string out;
  std::string representation;
};

int run_map(const MapArgs& a) {
  const Prep prep = prep_from_string(a.prep);
  const json diag_json = json::parse(read_text_file(a.diagnoses));
  std::map<std::string, Label> diagnoses;
  for (const auto& [id, value] : diag_json.items()) {
    diagnoses[id] = value.is_number() ? label_from_int(value.get<int>()) : label_from_string(value.get<std::string>());
  }
  std::string out;
  std::size_t failed = 0;
  std::size_t total = 0;
  for (const auto& j : read_ndjson(a.attributions)) {
    ++total;
    const ClassAttribution attr = class_attribution_from_json(j);
    try {
      const BipolarProfile phi = bipolar_profile(attr);
      const bool twelve = phi.values.rows() == static_cast<Eigen::Index>(kLeadCount);
      const std::string rep = !a.representation.empty() ? a.representation : (twelve ? "ecg12" : "cine_direct");
      Matrix profile = phi.values;
      json extra = json::object();
      if (representation_from_string(rep) == Representation::CineMapped) {
        const MappedProfile mapped = map_to_cine(phi);
        profile = Matrix(1, mapped.temporal.size());
        profile.row(0) = mapped.temporal;
        extra["degenerate"] = mapped.degenerate;
      }
      auto it = diagnoses.find(attr.case_id);
      const std::optional<Label> diagnosis =
          it == diagnoses.end() ? std::nullopt : std::optional<Label>(it->second);
      const Matrix oriented = orient_by_diagnosis(profile, diagnosis);
      const CellMask region = CellMask::Constant(oriented.rows(), oriented.cols(), true);
      const ImportanceMap map = post_process(oriented, prep, region, *diagnosis);
      json row = {{"case_id", attr.case_id},
                  {"method", to_string(attr.method)},
                  {"representation", rep},
                  {"prep", to_string(prep)},
                  {"oriented_for", to_string(*diagnosis)},
                  {"constant", map.constant},
                  {"values", matrix_to_json(map.values)}};
      row.update(extra);
      out += row.dump() + "\n";
    } catch (const Error& e) {
      ++failed;
      std::cerr << attr.case_id << ": " << e.what() << "\n";
    }
  }
  write_text_file(a.out, out);
  if (total > 0 && failed == total) return 1;
  return failed ? 2 : 0;
}

// ---- pool / report -------------------------------------------------------------------------

int run_pool_cmd(const std::string& config_path, const std::string& out_path) {
  const fs::path cfg_file(config_path);
  const PoolConfig config = pool_config_from_json(json::parse(read_text_file(cfg_file)), cfg_file.parent_path());
  const PoolInputs inputs = load_pool_inputs(config);
  const PoolOutcome outcome = run_pool(config, inputs);
  write_text_file(out_path, results_to_ndjson(outcome.rows));
  for (const auto& row : outcome.rows) {
    if (row.error) {
      std::cerr << fmt::format("{} {} {} {} seed={}: {}\n", row.result.case_id, row.result.config.representation,
                               row.result.config.method, row.result.config.prep, row.seed, *row.error);
    }
  }
  std::cout << json{{"cells", outcome.stats.cells},
                    {"cache_hits", outcome.stats.cache_hits},
                    {"computed", outcome.stats.computed},
                    {"errors", outcome.stats.errors},
                    {"attributions_computed", outcome.stats.attributions_computed}}
                   .dump()
            << "\n";
  return outcome.stats.errors ? 2 : 0;
}

struct ReportArgs {
  std::string results;
  std::string format = "md";
  std::size_t B = 2000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::string out;
};

int run_report(const ReportArgs& a) {
  std::istringstream in(read_text_file(a.results));
  const auto rows = read_results(in);
  const CohortReport report = build_report(rows, a.B, a.alpha, a.seed);
  const std::string text = a.format == "json" ? emit_json(report).dump(2) + "\n" : emit_markdown(report);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(a.out, text);
  }
  return 0;
}

// ---- UI plumbing ------------------------------------------------------------------------------

struct ExportArgs {
  std::string data;
  std::string case_id;
  bool blind = false;
  std::string out;
  std::string attributions;
  std::string checkpoint;
  std::string annotations;
  double window_ms = kDefaultWindowMs;
};

int run_export(const ExportArgs& a) {
  std::optional<Case> found;
  for (const auto& c : load_dataset(a.data)) {
    if (c.ecg.case_id == a.case_id) found = truncate_case(c, a.window_ms);
  }
  if (!found) throw Error(ErrorKind::InvalidConfig, "case " + a.case_id + " not in " + a.data);
  std::vector<Overlay> overlays;
  std::optional<Label> diagnosis;
  std::optional<Label> prediction;
  if (!a.blind) {
    if (!a.attributions.empty()) {
      for (const auto& j : read_ndjson(a.attributions)) {
        if (j.value("case_id", std::string()) != a.case_id) continue;
        const BipolarProfile phi = bipolar_profile(class_attribution_from_json(j));
        if (phi.values.rows() == static_cast<Eigen::Index>(kLeadCount)) {
          overlays.push_back(make_overlay("ecg12", phi.values));
          overlays.push_back(make_overlay("cine", map_to_cine(phi).replicated));
        } else {
          overlays.push_back(make_overlay("cine", phi.values));
        }
      }
    }
    if (!a.annotations.empty()) {
      for (const auto& ann : load_annotations(a.annotations)) {
        if (ann.case_id == a.case_id && ann.diagnosis) diagnosis = ann.diagnosis;
      }
    }
    if (!a.checkpoint.empty()) {
      const ResNet1d model = load_checkpoint(a.checkpoint);
      prediction = predict(model, input_of(*found, model.config().in_channels));
    }
  }
  const json bundle = export_case_bundle(*found, overlays, diagnosis, prediction, a.blind);
  write_text_file(a.out, bundle.dump() + "\n");
  return 0;
}

struct ImportArgs {
  std::string in;
  std::string out;
  int rate = kDefaultSampleRateHz;
  double window_ms = kDefaultWindowMs;
};

int run_import(const ImportArgs& a) {
  const auto annotations = load_annotations(a.in);
  std::string normalized;
  for (const auto& ann : annotations) {
    const BinaryMask mask = annotation_to_mask(ann, a.rate, a.window_ms);
    const ExpertAnnotation norm = mask_to_annotation(mask, a.rate, ann);
    std::vector<std::string> leads;
    for (auto r : mask.selected_leads) leads.emplace_back(ann.modality == AnnotationModality::Cine ? "all" : kLeadNames[r]);
    std::cout << json{{"case_id", ann.case_id},
                      {"annotator_id", ann.annotator_id},
                      {"modality", to_string(ann.modality)},
                      {"selected_leads", leads},
                      {"mask_cells", mask.cells.count()},
                      {"segments", norm.segments.size()}}
                     .dump()
              << "\n";
    normalized += to_json(norm).dump() + "\n";
  }
  if (!a.out.empty()) write_text_file(a.out, normalized);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG / CineECG attribution alignment toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic cohort with truth-window annotations");
  g->add_option("--normal", gen.normal);
  g->add_option("--abnormal", gen.abnormal);
  g->add_option("--seed", gen.seed);
  g->add_option("--kind", gen.kind, "st | qrs | mixed");
  g->add_option("--out", gen.out)->required();
  g->add_option("--annotations", gen.annotations, "also write annotations (JSON array)");
  g->add_option("--baselines", gen.baselines, "also write Normal reference cases");
  g->add_option("--n-baselines", gen.n_baselines);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a classifier and print its TrainReport");
  t->add_option("--data", tr.data)->required();
  t->add_option("--modality", tr.modality)->check(CLI::IsMember({"ecg", "cine"}));
  t->add_option("--config", tr.config, "JSON text or file: {model, train, search_trials, window_ms}");
  t->add_option("--seed", tr.seed);
  t->add_option("--out-checkpoint", tr.out_checkpoint)->required();
  t->add_option("--out-split", tr.out_split);

  AttributeArgs at;
  auto* att = app.add_subcommand("attribute", "Per-class attributions as NDJSON");
  att->add_option("--checkpoint", at.checkpoint)->required();
  att->add_option("--data", at.data)->required();
  att->add_option("--method", at.method)->required()->check(CLI::IsMember({"ig", "gradshap", "kernelshap", "lime"}));
  att->add_option("--params", at.params, "JSON text or file");
  att->add_option("--seed", at.seed);
  att->add_option("--out", at.out)->required();
  att->add_option("--baselines", at.baselines, "Normal reference cases (dataset NDJSON)");
  att->add_option("--cases", at.cases);
  att->add_option("--window-ms", at.window_ms);
  att->add_option("--threads", at.threads);

  MapArgs mp;
  auto* m = app.add_subcommand("map", "Bipolar profile, projection, orientation and post-processing");
  m->add_option("--attributions", mp.attributions)->required();
  m->add_option("--diagnoses", mp.diagnoses, "JSON object case_id -> diagnosis")->required();
  m->add_option("--prep", mp.prep)->required()->check(CLI::IsMember({"positive", "absolute", "scaled"}));
  m->add_option("--out", mp.out)->required();
  m->add_option("--representation", mp.representation)->check(CLI::IsMember({"ecg12", "cine_direct", "cine_mapped"}));

  std::string pool_config, pool_out;
  auto* p = app.add_subcommand("pool", "Run the optimisation pool");
  p->add_option("--config", pool_config)->required();
  p->add_option("--out", pool_out)->required();

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Summarise pool results");
  r->add_option("--results", rp.results)->required();
  r->add_option("--format", rp.format)->check(CLI::IsMember({"md", "json"}));
  r->add_option("--B", rp.B);
  r->add_option("--alpha", rp.alpha);
  r->add_option("--seed", rp.seed);
  r->add_option("--out", rp.out);

  ExportArgs ex;
  auto* e = app.add_subcommand("export-ui", "Write a case bundle for the annotation UI");
  e->add_option("--data", ex.data)->required();
  e->add_option("--case", ex.case_id)->required();
  e->add_flag("--blind", ex.blind);
  e->add_option("--out", ex.out)->required();
  e->add_option("--attributions", ex.attributions);
  e->add_option("--checkpoint", ex.checkpoint);
  e->add_option("--annotations", ex.annotations);
  e->add_option("--window-ms", ex.window_ms);

  ImportArgs im;
  auto* i = app.add_subcommand("import-annotations", "Validate and rasterise annotation JSON");
  i->add_option("--in", im.in)->required();
  i->add_option("--out", im.out, "write normalized annotations (NDJSON)");
  i->add_option("--rate", im.rate);
  i->add_option("--window-ms", im.window_ms);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*att) return run_attribute(at);
    if (*m) return run_map(mp);
    if (*p) return run_pool_cmd(pool_config, pool_out);
    if (*r) return run_report(rp);
    if (*e) return run_export(ex);
    if (*i) return run_import(im);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
