#include "mmlda/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mmlda/atomic_file.hpp"
#include "mmlda/dataset_io.hpp"
#include "mmlda/error.hpp"
#include "mmlda/model_io.hpp"

namespace mmlda {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const WeightConfig& w) {
  json j = json::object();
  for (std::string_view id : modality::kAll) j[std::string(id)] = w.for_modality(id);
  return j;
}

WeightConfig weights_from_json(const json& j, WeightConfig base) {
  for (const auto& [id, v] : j.items()) base.set(id, v.get<std::uint32_t>());
  base.validate();
  return base;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("architecture")) c.architecture = architecture_from_string(j.at("architecture").get<std::string>());
    if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
    if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"));
    c.inference = j.contains("inference") ? schedule_from_json(j.at("inference")) : c.schedule;
    if (j.contains("weights")) c.weights = weights_from_json(j.at("weights"));
    c.seed = j.value("seed", c.seed);
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    c.threads = j.value("threads", c.threads);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.extrapolation_replicates = j.value("extrapolation_replicates", c.extrapolation_replicates);
    if (j.contains("budget")) {
      const json& b = j.at("budget");
      c.budget.n_candidates = b.value("n_candidates", c.budget.n_candidates);
      c.budget.seed = b.value("seed", c.budget.seed);
      c.budget.min_weight = b.value("min_weight", c.budget.min_weight);
      c.budget.max_weight = b.value("max_weight", c.budget.max_weight);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  return c;
}

json to_json(const RunConfig& c) {
  return json{{"architecture", std::string(to_string(c.architecture))},
              {"dataset", c.dataset.string()},
              {"schedule", to_json(c.schedule)},
              {"inference", to_json(c.inference)},
              {"weights", to_json(c.weights)},
              {"seed", c.seed},
              {"output", c.output.string()},
              {"threads", c.threads},
              {"train_fraction", c.train_fraction},
              {"extrapolation_replicates", c.extrapolation_replicates},
              {"budget",
               {{"n_candidates", c.budget.n_candidates},
                {"seed", c.budget.seed},
                {"min_weight", c.budget.min_weight},
                {"max_weight", c.budget.max_weight}}}};
}

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config file '" + path.string() + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomically(path, [&](std::ostream& o) { o << text; });
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Dataset with a train/test split, creating one from the config if the file has none.
Dataset load_split_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw ValidationError("no dataset given (use --dataset or the config's \"dataset\")");
  Dataset ds = load_dataset(cfg.dataset);
  if (ds.train_days.empty() || ds.test_days.empty()) ds = split_dataset(std::move(ds), cfg.train_fraction, cfg.seed);
  return ds;
}

EvalSettings eval_settings(const RunConfig& cfg) {
  EvalSettings s;
  s.inference = cfg.inference;
  s.seed = cfg.seed;
  s.threads = cfg.threads;
  s.extrapolation_replicates = cfg.extrapolation_replicates;
  return s;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  if (dynamic_cast<const StateError*>(&e)) return "StateError";
  if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "FilesystemError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "InternalError";
}

struct Flags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string arch;
  std::string dataset;
  int iterations = 0;
  int passes = 0;
  std::vector<std::string> models;
  std::string node = std::string(node::kSelfValue);
  std::string split = "test";
  int budget = 0;
  int days = 0;
  double train_fraction = 0.8;
};

bool given(const CLI::App& app, const std::string& name) {
  const CLI::Option* opt = app.get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

RunConfig resolve(const Flags& f, CLI::App& app) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : run_config_from_json(read_json_file(f.config));
  if (given(app, "--arch")) cfg.architecture = architecture_from_string(f.arch);
  if (given(app, "--dataset")) cfg.dataset = f.dataset;
  if (given(app, "--seed")) cfg.seed = f.seed;
  if (given(app, "--threads")) cfg.threads = f.threads;
  if (given(app, "--out")) cfg.output = f.out;
  if (given(app, "--iterations")) cfg.schedule.inner_iterations = cfg.inference.inner_iterations = f.iterations;
  if (given(app, "--passes")) cfg.schedule.global_passes = cfg.inference.global_passes = f.passes;
  if (given(app, "--budget")) cfg.budget.n_candidates = f.budget;
  cfg.schedule.validate();
  cfg.inference.validate();
  if (cfg.threads < 1) throw ValidationError("--threads must be >= 1");
  return cfg;
}

fs::path require_output(const RunConfig& cfg) {
  if (cfg.output.empty()) throw ValidationError("no output path given (use --out)");
  return cfg.output;
}

int cmd_generate(const Flags& f, CLI::App& app, std::ostream& out) {
  SimulatorParams params = f.config.empty() ? SimulatorParams{} : params_from_json(read_json_file(f.config));
  if (given(app, "--seed")) params.seed = f.seed;
  if (given(app, "--days")) params.n_days = f.days;
  if (f.out.empty()) throw ValidationError("no output path given (use --out)");
  params.validate();
  Dataset ds = split_dataset(simulate_dataset(params), f.train_fraction, params.seed);
  if (fs::path(f.out).has_parent_path()) fs::create_directories(fs::path(f.out).parent_path());
  save_dataset(f.out, ds);

  std::array<double, 6> self_sum{}, partner_sum{};
  for (const Day& d : ds.days)
    for (const BlockDocument& b : d.blocks) {
      const auto c = static_cast<std::size_t>(index_of(b.condition));
      self_sum[c] += b.at(modality::kSelfReward).counts[0];
      partner_sum[c] += b.at(modality::kPartnerReward).counts[0];
    }
  out << "days: " << ds.days.size() << "  blocks: " << ds.n_blocks() << "  train days: " << ds.train_days.size()
      << "  test days: " << ds.test_days.size() << '\n';
  out << "condition   mean_self_rewards  mean_partner_rewards\n";
  for (std::size_t c = 0; c < 6; ++c)
    out << std::left << std::setw(12) << to_string(kConditions[c]) << std::setw(19) << std::fixed
        << std::setprecision(2) << self_sum[c] / static_cast<double>(ds.days.size())
        << partner_sum[c] / static_cast<double>(ds.days.size()) << '\n';
  return 0;
}

int cmd_train(const Flags& f, CLI::App& app, std::ostream& out) {
  const RunConfig cfg = resolve(f, app);
  const fs::path path = require_output(cfg);
  const Dataset ds = load_split_dataset(cfg);
  const auto docs = ds.blocks_of(ds.train_days);

  ModelDefaults defaults;
  defaults.weights = cfg.weights;
  ComposedModel model = build(architecture_spec(cfg.architecture, defaults));

  std::ostringstream log;
  log << "node,pass,sweeps,seconds\n";
  auto started = std::chrono::steady_clock::now();
  TrainOptions opts{cfg.seed, false, [&](const TrainEvent& e) {
                      if (e.sweep != cfg.schedule.inner_iterations) return;
                      const auto now = std::chrono::steady_clock::now();
                      log << e.node_id << ',' << e.pass << ',' << e.state->sweeps << ','
                          << std::chrono::duration<double>(now - started).count() << '\n';
                      started = now;
                    }};
  train(model, docs, cfg.schedule, opts);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_model(path, model);
  fs::path log_path = path;
  log_path += ".log.csv";
  write_text(log_path, log.str());
  out << "trained " << to_string(cfg.architecture) << " on " << docs.size() << " blocks -> " << path.string() << '\n';
  return 0;
}

json summary_json(const InterpolationResult& r) {
  json rows = json::array();
  for (const auto& c : r.per_condition)
    rows.push_back({{"condition", std::string(to_string(c.condition))}, {"mean", c.mean}, {"sem", c.sem}, {"n", c.n}});
  return rows;
}

json nmi_json(const NmiTable& t, bool compared) {
  json rows = json::array();
  for (const NmiRecord& r : t.records) {
    json row{{"pair", json::array({r.variable, std::string(node::kSelfValue)})},
             {"median", r.median},
             {"iqr", json::array({r.q1, r.q3})},
             {"n_days", r.per_day.size()}};
    if (r.comparison) {
      row["wilcoxon"] = {{"z", r.comparison->z}, {"p", r.comparison->p}, {"n", r.comparison->n},
                         {"exact", r.comparison->exact}};
    } else if (compared) {
      row["wilcoxon"] = {{"skipped", "fewer than 6 test days with a non-zero NMI difference"}};
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string nmi_csv(const NmiTable& t) {
  std::ostringstream os;
  os << "day";
  for (const auto& r : t.records) os << ',' << r.variable;
  os << '\n' << std::setprecision(10);
  for (std::size_t d = 0; d < t.days.size(); ++d) {
    os << t.days[d];
    for (const auto& r : t.records) os << ',' << r.per_day[d];
    os << '\n';
  }
  return os.str();
}

int cmd_evaluate(const Flags& f, CLI::App& app, std::ostream& out) {
  const RunConfig cfg = resolve(f, app);
  const fs::path dir = require_output(cfg);
  if (f.models.empty()) throw ValidationError("evaluate needs at least one --model snapshot");
  const Dataset ds = load_split_dataset(cfg);
  const auto test = ds.blocks_of(ds.test_days);
  const EvalSettings settings = eval_settings(cfg);
  fs::create_directories(dir);

  json report{{"schema", "mmlda.report"},
              {"schema_version", 1},
              {"n_test_blocks", test.size()},
              {"chance_level", rand_chance_level(6)},
              {"models", json::array()}};
  std::map<std::string, NmiTable> nmi_tables;
  for (const std::string& model_path : f.models) {
    const ComposedModel model = load_model(model_path);
    const std::string name = model.spec().name.empty() ? "model" : model.spec().name;
    const auto thetas = infer_all(model, test, settings);
    const Labeling predicted = classify_from_thetas(thetas);
    const double rand = rand_index(predicted, ground_truth(test));
    const InterpolationResult interp = predict_licking_interpolation(model, test, settings);
    const auto extrap = extrapolation_sweep(model, settings);
    write_text(dir / (name + "_licking_interpolation.csv"), interpolation_csv(interp));
    write_text(dir / (name + "_licking_extrapolation.csv"), extrapolation_csv(extrap));
    export_topic_vectors(dir / (name + "_topic_vectors.csv"), model, test, thetas, node::kSelfValue);

    json entry{{"architecture", name},
               {"snapshot", model_path},
               {"rand_index", rand},
               {"free_parameters", free_parameter_count(model.spec())},
               {"interpolation", summary_json(interp)}};
    const auto arch = architecture_of(model.spec());
    if (arch && *arch != Architecture::NCM) {
      nmi_tables[name] = nmi_table(model, test, thetas);
      write_text(dir / (name + "_nmi.csv"), nmi_csv(nmi_tables[name]));
    } else {
      entry["nmi_notice"] = "NMI analysis skipped: defined for IPM and ECM only";
      out << "notice: NMI skipped for " << name << " (IPM and ECM only)\n";
    }
    report["models"].push_back(std::move(entry));
    out << name << ": rand index " << std::fixed << std::setprecision(4) << rand << " (chance "
        << rand_chance_level(6) << ")\n";
  }
  const bool compared = nmi_tables.count("ECM") && nmi_tables.count("IPM");
  if (compared) compare_nmi(nmi_tables["ECM"], nmi_tables["IPM"]);
  for (auto& entry : report["models"]) {
    const std::string name = entry["architecture"].get<std::string>();
    auto it = nmi_tables.find(name);
    if (it != nmi_tables.end()) entry["nmi"] = nmi_json(it->second, compared && name == "ECM");
  }
  if (compared)
    report["nmi_comparison"] = "wilcoxon fields on ECM rows compare ECM against IPM, paired by test day";
  write_json(dir / "report.json", report);
  return 0;
}

int cmd_predict(const Flags& f, CLI::App& app, std::ostream& out) {
  const RunConfig cfg = resolve(f, app);
  const fs::path dir = require_output(cfg);
  if (f.models.size() != 1) throw ValidationError("predict takes exactly one --model snapshot");
  const ComposedModel model = load_model(f.models.front());
  const std::string name = model.spec().name.empty() ? "model" : model.spec().name;
  const EvalSettings settings = eval_settings(cfg);
  fs::create_directories(dir);
  write_text(dir / (name + "_licking_extrapolation.csv"), extrapolation_csv(extrapolation_sweep(model, settings)));
  if (!cfg.dataset.empty()) {
    const Dataset ds = load_split_dataset(cfg);
    const auto test = ds.blocks_of(ds.test_days);
    write_text(dir / (name + "_licking_interpolation.csv"),
               interpolation_csv(predict_licking_interpolation(model, test, settings)));
  }
  out << "predictions written to " << dir.string() << '\n';
  return 0;
}

int cmd_tune(const Flags& f, CLI::App& app, std::ostream& out) {
  const RunConfig cfg = resolve(f, app);
  const fs::path dir = require_output(cfg);
  const Dataset ds = load_split_dataset(cfg);
  const auto train_docs = ds.blocks_of(ds.train_days);
  const auto heldout = ds.blocks_of(ds.test_days);
  TuningTarget target;
  target.architecture = cfg.architecture;
  target.defaults.weights = cfg.weights;
  target.schedule = cfg.schedule;
  target.train_seed = cfg.seed;
  target.eval = eval_settings(cfg);
  SearchBudget budget = cfg.budget;
  if (!given(app, "--budget") && !f.config.empty()) budget.seed = cfg.budget.seed;
  const TuningResult r = tune_weights(train_docs, heldout, target, budget);
  fs::create_directories(dir);
  write_text(dir / "tune_trace.csv", trace_csv(r.trace));
  RunConfig best = cfg;
  best.weights = r.best;
  json fragment{{"weights", to_json(r.best)}, {"kl", r.best_score}, {"run_config", to_json(best)}};
  write_json(dir / "best_config.json", fragment);
  out << "evaluated " << r.trace.size() << " candidates; best KL " << r.best_score << '\n';
  return 0;
}

int cmd_export(const Flags& f, CLI::App& app, std::ostream& out) {
  const RunConfig cfg = resolve(f, app);
  const fs::path path = require_output(cfg);
  if (f.models.size() != 1) throw ValidationError("export takes exactly one --model snapshot");
  const ComposedModel model = load_model(f.models.front());
  const Dataset ds = load_split_dataset(cfg);
  std::vector<BlockDocument> docs;
  if (f.split == "test") docs = ds.blocks_of(ds.test_days);
  else if (f.split == "train") docs = ds.blocks_of(ds.train_days);
  else if (f.split == "all") docs = ds.all_blocks();
  else throw ValidationError("--split must be train, test or all");
  if (!model.has_node(f.node)) throw ValidationError("model has no node '" + f.node + "'");
  const auto thetas = infer_all(model, docs, eval_settings(cfg));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  export_topic_vectors(path, model, docs, thetas, f.node);
  out << "exported " << docs.size() << " topic vectors for " << f.node << " -> " << path.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal multi-layered LDA toolkit for social reward comparison"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--out", f.out, "Output path (file or directory)");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--threads", f.threads, "Maximum worker threads");
  };
  auto run_opts = [&](CLI::App* sub) {
    common(sub);
    sub->add_option("--arch", f.arch, "Architecture: IPM, NCM or ECM");
    sub->add_option("--dataset", f.dataset, "Dataset file (JSON Lines)");
    sub->add_option("--iterations", f.iterations, "Sweeps per node per pass");
    sub->add_option("--passes", f.passes, "Message-passing passes");
  };

  auto* gen = app.add_subcommand("generate", "Simulate a synthetic dataset");
  common(gen);
  gen->add_option("--days", f.days, "Number of days");
  gen->add_option("--train-fraction", f.train_fraction, "Fraction of days in the training split");
  auto* trn = app.add_subcommand("train", "Train an architecture on the training split");
  run_opts(trn);
  auto* evl = app.add_subcommand("evaluate", "Evaluate snapshots on the test split");
  run_opts(evl);
  evl->add_option("--model", f.models, "Model snapshot (repeatable)");
  auto* prd = app.add_subcommand("predict", "Licking predictions (extrapolation, and interpolation with --dataset)");
  run_opts(prd);
  prd->add_option("--model", f.models, "Model snapshot");
  auto* tun = app.add_subcommand("tune", "Search modality weights");
  run_opts(tun);
  tun->add_option("--budget", f.budget, "Number of candidates");
  auto* exp = app.add_subcommand("export", "Export per-block topic vectors as CSV");
  run_opts(exp);
  exp->add_option("--model", f.models, "Model snapshot");
  exp->add_option("--node", f.node, "Node id");
  exp->add_option("--split", f.split, "train, test or all");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen->parsed()) return cmd_generate(f, *gen, out);
    if (trn->parsed()) return cmd_train(f, *trn, out);
    if (evl->parsed()) return cmd_evaluate(f, *evl, out);
    if (prd->parsed()) return cmd_predict(f, *prd, out);
    if (tun->parsed()) return cmd_tune(f, *tun, out);
    if (exp->parsed()) return cmd_export(f, *exp, out);
  } catch (const std::exception& e) {
    err << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace mmlda
