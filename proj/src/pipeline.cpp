#include "amcbench/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>

#include <json.hpp>

#include "amcbench/attribution.hpp"
#include "amcbench/defense.hpp"

namespace fs = std::filesystem;

namespace amcbench {

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Generate: return "generate";
    case Stage::TrainClean: return "train";
    case Stage::Attribute: return "attribute";
    case Stage::Trigger: return "trigger";
    case Stage::Poison: return "poison";
    case Stage::TrainBackdoored: return "train_backdoored";
    case Stage::Evaluate: return "evaluate";
    case Stage::Defend: return "defend";
  }
  throw std::invalid_argument("unknown stage");
}

namespace {

constexpr const char* kCacheVersion = "amcb-pipeline-1";

std::vector<Stage> deps_of(Stage s, const ExperimentConfig& cfg) {
  switch (s) {
    case Stage::Generate: return {};
    case Stage::TrainClean: return {Stage::Generate};
    case Stage::Attribute: return {Stage::Generate, Stage::TrainClean};
    case Stage::Trigger:
      if (cfg.trigger_mode == TriggerMode::Xai) return {Stage::Attribute};
      return {Stage::Generate};
    case Stage::Poison: return {Stage::Trigger};
    case Stage::TrainBackdoored: return {Stage::Poison};
    case Stage::Evaluate: return {Stage::TrainClean, Stage::Trigger, Stage::TrainBackdoored};
    case Stage::Defend: return {Stage::Trigger, Stage::Poison, Stage::TrainBackdoored};
  }
  throw std::invalid_argument("unknown stage");
}

void close_over(Stage s, const ExperimentConfig& cfg, std::set<Stage>& acc) {
  if (acc.count(s)) return;
  for (Stage d : deps_of(s, cfg)) close_over(d, cfg, acc);
  acc.insert(s);
}

std::string fmt(double v) {
  char b[48];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (double x : v) {
    out += fmt(x);
    out += ',';
  }
  return out;
}

std::string join(const std::vector<uint32_t>& v) {
  std::string out;
  for (uint32_t x : v) {
    out += std::to_string(x);
    out += ',';
  }
  return out;
}

std::string arch_list(const std::vector<Arch>& archs) {
  std::string out;
  for (Arch a : archs) {
    out += arch_name(a);
    out += ',';
  }
  return out;
}

std::string slice_for(Stage s, const ExperimentConfig& c) {
  std::string out;
  auto add = [&](const char* k, const std::string& v) {
    out += k;
    out += '=';
    out += v;
    out += ';';
  };
  switch (s) {
    case Stage::Generate: {
      add("n", std::to_string(c.n_examples));
      add("tf", fmt(c.train_fraction));
      add("seed", std::to_string(c.dataset_seed));
      add("snr", join(c.snr_grid_db));
      std::string cls;
      for (ModulationScheme m : c.classes) {
        cls += scheme_name(m);
        cls += ',';
      }
      add("classes", cls);
      add("N", std::to_string(c.ofdm.n_subcarriers));
      add("cp", std::to_string(c.ofdm.cp_len));
      add("M", std::to_string(c.ofdm.symbols_per_frame));
      add("pa_p", fmt(c.pa.rapp_smoothness));
      add("pa_ibo", fmt(c.pa.ibo_db));
      add("taps", join(c.tap_delays));
      add("decay", fmt(c.tap_decay));
      break;
    }
    case Stage::TrainClean:
    case Stage::TrainBackdoored: {
      add("epochs", std::to_string(c.train.epochs));
      add("batch", std::to_string(c.train.batch_size));
      add("lr", fmt(c.train.learning_rate));
      add("opt", c.train.optimizer == TrainConfig::Opt::Adam ? "adam" : "sgd");
      add("archs", arch_list(c.archs));
      add("master", std::to_string(c.master_seed));
      break;
    }
    case Stage::Attribute: {
      add("ytar", std::to_string(c.y_tar));
      add("wlen", std::to_string(c.window_len));
      add("perms", std::to_string(c.n_permutations));
      add("spc", std::to_string(c.symbols_per_class));
      add("pool", std::to_string(c.bg_pool));
      add("mix", fmt(c.bg_target_mix));
      add("topk", std::to_string(c.top_k));
      add("surrogate", std::string(arch_name(c.surrogate)));
      add("master", std::to_string(c.master_seed));
      break;
    }
    case Stage::Trigger: {
      add("mode", std::string(trigger_mode_name(c.trigger_mode)));
      add("lambda", fmt(c.lambda_mix));
      add("kappa", fmt(c.kappa_db));
      add("topk", std::to_string(c.top_k));
      add("wlen", std::to_string(c.window_len));
      add("ytar", std::to_string(c.y_tar));
      add("master", std::to_string(c.master_seed));
      break;
    }
    case Stage::Poison: {
      add("fraction", fmt(c.example_fraction));
      add("rhoh", fmt(c.rho_h));
      add("master", std::to_string(c.master_seed));
      break;
    }
    case Stage::Evaluate: {
      add("grid", join(c.eval_snr_db));
      add("frames", std::to_string(c.eval_frames));
      add("ytar", std::to_string(c.y_tar));
      add("master", std::to_string(c.master_seed));
      break;
    }
    case Stage::Defend: {
      add("arch", std::string(arch_name(c.defend_arch)));
      add("snr", fmt(c.resolved_defend_snr()));
      add("strip", c.strip_on ? "1" : "0");
      add("overlays", std::to_string(c.strip_overlays));
      add("sframes", std::to_string(c.strip_frames));
      add("clust", c.clustering_on ? "1" : "0");
      add("anomaly", c.anomaly_on ? "1" : "0");
      add("steps", std::to_string(c.anomaly_steps));
      add("aframes", std::to_string(c.anomaly_frames));
      add("master", std::to_string(c.master_seed));
      break;
    }
  }
  return out;
}

std::string model_file(Arch a, bool backdoored) {
  return std::string(arch_name(a)) + (backdoored ? "_backdoored.bin" : "_clean.bin");
}

std::vector<fs::path> artifacts_of(Stage s, const ExperimentConfig& cfg, const fs::path& out) {
  switch (s) {
    case Stage::Generate:
      return {out / "dataset.bin", out / "dataset.bin.manifest.json"};
    case Stage::TrainClean:
    case Stage::TrainBackdoored: {
      std::vector<fs::path> v;
      for (Arch a : cfg.archs)
        v.push_back(out / "models" / model_file(a, s == Stage::TrainBackdoored));
      return v;
    }
    case Stage::Attribute: return {out / "shap_report.json"};
    case Stage::Trigger: return {out / "trigger.json"};
    case Stage::Poison:
      return {out / "poisoned.bin", out / "poisoned.bin.manifest.json"};
    case Stage::Evaluate: return {out / "metrics.csv"};
    case Stage::Defend: return {out / "defense_report.json"};
  }
  throw std::invalid_argument("unknown stage");
}

ModelConfig model_config_for(const ExperimentConfig& cfg, Arch a) {
  ModelConfig mc;
  mc.arch = a;
  mc.symbols_per_frame = cfg.ofdm.symbols_per_frame;
  mc.n_subcarriers = cfg.ofdm.n_subcarriers;
  mc.n_classes = static_cast<uint32_t>(cfg.classes.size());
  return mc;
}

struct Ctx {
  const ExperimentConfig& cfg;
  fs::path out;
  std::array<std::string, 8> keys;
  RunSummary summary;

  std::optional<LabeledDataset> clean_ds;
  std::optional<LabeledDataset> poisoned_ds;
  std::optional<TriggerSpec> trigger;
  std::optional<ShapReport> shap;
  std::map<std::string, Model> models;

  const LabeledDataset& dataset() {
    if (!clean_ds) clean_ds = load_dataset((out / "dataset.bin").string());
    return *clean_ds;
  }
  const LabeledDataset& poisoned() {
    if (!poisoned_ds) poisoned_ds = load_dataset((out / "poisoned.bin").string());
    return *poisoned_ds;
  }
  const TriggerSpec& trig() {
    if (!trigger) trigger = trigger_from_json(read_file_bytes((out / "trigger.json").string()));
    return *trigger;
  }
  const ShapReport& report() {
    if (!shap) shap = shap_report_from_json(read_file_bytes((out / "shap_report.json").string()));
    return *shap;
  }
  const Model& model(Arch a, bool backdoored) {
    std::string name = model_file(a, backdoored);
    auto it = models.find(name);
    if (it == models.end())
      it = models.emplace(name, load_model((out / "models" / name).string())).first;
    return it->second;
  }
};

void split_views(const LabeledDataset& ds, bool train_split, std::vector<const float*>& xs,
                 std::vector<uint16_t>& ys) {
  const size_t n = train_split ? ds.n_train() : ds.n_test();
  xs.resize(n);
  ys.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const LabeledExample& ex = train_split ? ds.train(i) : ds.test(i);
    xs[i] = ex.x.data();
    ys[i] = ex.label;
  }
}

void run_generate(Ctx& ctx) {
  LabeledDataset ds = generate_dataset(ctx.cfg.dataset_manifest());
  save_dataset(ds, (ctx.out / "dataset.bin").string());
  ctx.clean_ds = std::move(ds);
}

void run_train(Ctx& ctx, bool backdoored) {
  const ExperimentConfig& cfg = ctx.cfg;
  const LabeledDataset& ds = backdoored ? ctx.poisoned() : ctx.dataset();
  std::vector<const float*> xs;
  std::vector<uint16_t> ys;
  split_views(ds, true, xs, ys);
  const char* init_tag = backdoored ? "init_bd" : "init";
  const char* train_tag = backdoored ? "train_bd" : "train";
  for (Arch a : cfg.archs) {
    Model m(model_config_for(cfg, a));
    m.init_params(derive_seed(cfg.master_seed, init_tag, static_cast<uint64_t>(a)));
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.master_seed, train_tag, static_cast<uint64_t>(a));
    train(m, xs, ys, tc);
    std::string name = model_file(a, backdoored);
    save_model(m, (ctx.out / "models" / name).string());
    ctx.models.insert_or_assign(name, std::move(m));
  }
}

void run_attribute(Ctx& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const LabeledDataset& ds = ctx.dataset();
  WindowingSpec spec = WindowingSpec::for_symbol(cfg.ofdm.symbol_len(), cfg.window_len);
  Rng bg_rng(derive_seed(cfg.master_seed, "bgpool"));
  BackgroundSet bg =
      build_background(ds, cfg.y_tar, cfg.bg_pool, cfg.bg_target_mix, spec, bg_rng);
  Rng col_rng(derive_seed(cfg.master_seed, "collect"));
  std::vector<AttributionSample> samples =
      collect_attribution_symbols(ds, cfg.symbols_per_class, col_rng);
  ShapSettings settings;
  settings.n_permutations = cfg.n_permutations;
  settings.top_k = cfg.top_k;
  settings.seed = derive_seed(cfg.master_seed, "shap");
  ShapReport rep = sampling_shap(ctx.model(cfg.surrogate, false), cfg.ofdm, samples,
                                 cfg.y_tar, spec, bg, settings);
  write_file_bytes((ctx.out / "shap_report.json").string(), shap_report_to_json(rep));
  ctx.shap = std::move(rep);
}

void run_trigger(Ctx& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  WindowingSpec spec = WindowingSpec::for_symbol(cfg.ofdm.symbol_len(), cfg.window_len);
  TriggerSpec t;
  if (cfg.trigger_mode == TriggerMode::Xai) {
    std::vector<uint32_t> sel = ctx.report().selected_windows;
    if (sel.empty()) throw std::runtime_error("attribution report selected no windows");
    std::vector<NormalizedWindow> windows =
        collect_target_windows(ctx.dataset(), cfg.y_tar, sel[0], spec);
    EnergyBudget budget = pooled_energy_budget(windows, cfg.kappa_db);
    ClassStats stats = target_class_stats(windows);
    t = compose_trigger(stats, cfg.lambda_mix, budget.alpha, cfg.kappa_db, sel);
  } else {
    Rng rng(derive_seed(cfg.master_seed, "bltrig"));
    std::vector<uint32_t> sel = draw_window_indices(spec.n_windows, cfg.top_k, rng);
    std::vector<NormalizedWindow> windows =
        collect_target_windows(ctx.dataset(), cfg.y_tar, sel[0], spec);
    EnergyBudget budget = pooled_energy_budget(windows, cfg.kappa_db);
    t = random_window_trigger(budget.alpha, cfg.window_len, cfg.kappa_db, sel, rng);
  }
  write_file_bytes((ctx.out / "trigger.json").string(), trigger_to_json(t));
  ctx.trigger = std::move(t);
}

void run_poison(Ctx& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  PoisonPlan plan;
  plan.y_tar = cfg.y_tar;
  plan.trigger = ctx.trig();
  plan.rho_h = cfg.rho_h;
  plan.example_fraction = cfg.example_fraction;
  plan.seed = derive_seed(cfg.master_seed, "poison");
  PoisonedDataset pd = poison_dataset(ctx.dataset(), plan);
  save_dataset(pd.data, (ctx.out / "poisoned.bin").string());
  ctx.poisoned_ds = std::move(pd.data);
}

void run_evaluate(Ctx& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  std::vector<const Model*> clean_models, backdoored_models;
  for (Arch a : cfg.archs) {
    clean_models.push_back(&ctx.model(a, false));
    backdoored_models.push_back(&ctx.model(a, true));
  }
  std::vector<MetricRow> rows = snr_sweep(cfg, ctx.dataset(), clean_models,
                                          backdoored_models, ctx.trig(),
                                          derive_seed(cfg.master_seed, "eval"));
  write_file_bytes((ctx.out / "metrics.csv").string(), metrics_to_csv(rows));
  ctx.summary.metrics = std::move(rows);
}

void run_defend(Ctx& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const LabeledDataset& ds = ctx.dataset();
  const Model& bd = ctx.model(cfg.defend_arch, true);
  const double snr = cfg.resolved_defend_snr();
  const ChannelConfig chan = ChannelConfig::exponential(cfg.tap_delays, cfg.tap_decay, snr);
  const uint64_t chan_seed = derive_seed(cfg.master_seed, "defchan");
  const size_t n_test = ds.n_test();
  std::vector<uint32_t> all_rows(cfg.ofdm.symbols_per_frame);
  std::iota(all_rows.begin(), all_rows.end(), 0u);

  DefenseReport report;
  report.arch = std::string(arch_name(cfg.defend_arch));
  report.snr_db = snr;
  report.strip_overlays = cfg.strip_overlays;
  report.anomaly_steps = cfg.anomaly_steps;

  if (cfg.strip_on) {
    std::vector<std::vector<float>> clean_x(cfg.strip_frames), trig_x(cfg.strip_frames),
        overlay_x(cfg.strip_frames);
    for (uint32_t i = 0; i < cfg.strip_frames; ++i) {
      const LabeledExample& ex = ds.test(i % n_test);
      const uint64_t s = derive_seed(chan_seed, "dchan", i);
      clean_x[i] = rechannel(ex.clean_tx, cfg.ofdm, chan, snr, s);
      IqFrame f = inject_at_inference(ex.clean_tx, ctx.trig(), all_rows);
      trig_x[i] = rechannel(f, cfg.ofdm, chan, snr, s);
      const LabeledExample& ov = ds.test((cfg.strip_frames + i) % n_test);
      overlay_x[i] = rechannel(ov.clean_tx, cfg.ofdm, chan, snr,
                               derive_seed(chan_seed, "ochan", i));
    }
    auto views = [](const std::vector<std::vector<float>>& v) {
      std::vector<const float*> out(v.size());
      for (size_t i = 0; i < v.size(); ++i) out[i] = v[i].data();
      return out;
    };
    report.strip = strip(bd, views(clean_x), views(trig_x), views(overlay_x),
                         cfg.strip_overlays, derive_seed(cfg.master_seed, "strip"));
  }

  if (cfg.clustering_on)
    report.clustering =
        activation_clustering(bd, ctx.poisoned(), derive_seed(cfg.master_seed, "clust"));

  if (cfg.anomaly_on) {
    std::vector<std::vector<float>> frames(cfg.anomaly_frames);
    std::vector<const float*> views(cfg.anomaly_frames);
    for (uint32_t i = 0; i < cfg.anomaly_frames; ++i) {
      const LabeledExample& ex = ds.test(i % n_test);
      frames[i] = rechannel(ex.clean_tx, cfg.ofdm, chan, snr,
                            derive_seed(chan_seed, "achan", i));
      views[i] = frames[i].data();
    }
    ReverseEngineerConfig rc;
    rc.steps = cfg.anomaly_steps;
    rc.seed = derive_seed(cfg.master_seed, "nc");
    report.anomaly = reverse_engineer_anomaly(bd, views, rc);
  }

  write_file_bytes((ctx.out / "defense_report.json").string(),
                   defense_report_to_json(report));
}

void write_run_report(Ctx& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  nlohmann::json j;
  j["format_version"] = 1;
  j["master_seed"] = cfg.master_seed;

  nlohmann::json ds;
  ds["n_examples"] = cfg.n_examples;
  ds["n_train"] = cfg.n_train();
  ds["n_test"] = cfg.n_test();
  ds["seed"] = cfg.dataset_seed;
  ds["snr_grid_db"] = cfg.snr_grid_db;
  std::vector<std::string> class_names;
  for (ModulationScheme m : cfg.classes) class_names.emplace_back(scheme_name(m));
  ds["classes"] = class_names;
  j["dataset"] = ds;

  const TriggerSpec& t = ctx.trig();
  const uint32_t m_sym = cfg.ofdm.symbols_per_frame;
  const auto j_size =
      std::max<int64_t>(1, std::llround(cfg.rho_h / 100.0 * double(m_sym)));
  nlohmann::json atk;
  atk["mode"] = std::string(trigger_mode_name(cfg.trigger_mode));
  atk["y_tar"] = cfg.y_tar;
  atk["target_class"] = std::string(scheme_name(cfg.classes[cfg.y_tar]));
  atk["lambda"] = t.lambda_mix;
  atk["kappa_db"] = t.kappa_db;
  atk["alpha"] = t.alpha;
  atk["window_len"] = cfg.window_len;
  atk["windows"] = t.window_indices;
  atk["example_fraction"] = cfg.example_fraction;
  atk["rho_h_percent"] = 100.0 * double(j_size) / double(m_sym);
  atk["rho_v_percent"] = rho_v_percent(t.window_indices.size(), cfg.window_len,
                                       cfg.ofdm.n_subcarriers);
  atk["trigger_id"] = trigger_content_id(t);
  j["attack"] = atk;

  std::vector<std::string> archs;
  for (Arch a : cfg.archs) archs.emplace_back(arch_name(a));
  j["models"] = {{"archs", archs}, {"surrogate", std::string(arch_name(cfg.surrogate))}};

  nlohmann::json stages = nlohmann::json::array();
  for (const StageStatus& st : ctx.summary.stages)
    stages.push_back({{"name", std::string(stage_name(st.stage))},
                      {"key", st.key},
                      {"cache_hit", st.cache_hit}});
  j["stages"] = stages;

  nlohmann::json files;
  files["dataset"] = "dataset.bin";
  files["trigger"] = "trigger.json";
  files["poisoned"] = "poisoned.bin";
  files["metrics"] = "metrics.csv";
  files["defense"] = "defense_report.json";
  if (cfg.trigger_mode == TriggerMode::Xai) files["attribution"] = "shap_report.json";
  j["artifacts"] = files;

  write_file_bytes((ctx.out / "run_report.json").string(), j.dump(2) + "\n");
}

void execute(Ctx& ctx, Stage s) {
  switch (s) {
    case Stage::Generate: run_generate(ctx); break;
    case Stage::TrainClean: run_train(ctx, false); break;
    case Stage::Attribute: run_attribute(ctx); break;
    case Stage::Trigger: run_trigger(ctx); break;
    case Stage::Poison: run_poison(ctx); break;
    case Stage::TrainBackdoored: run_train(ctx, true); break;
    case Stage::Evaluate: run_evaluate(ctx); break;
    case Stage::Defend: run_defend(ctx); break;
  }
}

}  // namespace

std::vector<Stage> stages_for_goal(const std::string& goal, const ExperimentConfig& cfg) {
  std::vector<Stage> targets;
  if (goal == "generate") targets = {Stage::Generate};
  else if (goal == "train") targets = {Stage::TrainClean};
  else if (goal == "attribute") targets = {Stage::Attribute};
  else if (goal == "trigger") targets = {Stage::Trigger};
  else if (goal == "poison") targets = {Stage::Poison};
  else if (goal == "evaluate") targets = {Stage::Evaluate};
  else if (goal == "defend") targets = {Stage::Defend};
  else if (goal == "run") targets = {Stage::Evaluate, Stage::Defend};
  else throw std::invalid_argument("unknown goal '" + goal + "'");
  std::set<Stage> acc;
  for (Stage t : targets) close_over(t, cfg, acc);
  // Enum order is a valid topological order of the dependency graph.
  return std::vector<Stage>(acc.begin(), acc.end());
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                          const std::string& goal) {
  cfg.validate();
  std::vector<Stage> stages = stages_for_goal(goal, cfg);

  Ctx ctx{cfg, fs::path(out_dir)};
  ctx.summary.out_dir = out_dir;
  fs::create_directories(ctx.out / "cache");
  fs::create_directories(ctx.out / "models");

  for (Stage s : stages) {
    std::string material = std::string(kCacheVersion) + "|" + std::string(stage_name(s)) +
                           "|" + slice_for(s, cfg) + "|";
    for (Stage d : deps_of(s, cfg)) {
      material += ctx.keys[static_cast<size_t>(d)];
      material += '|';
    }
    char keybuf[24];
    std::snprintf(keybuf, sizeof keybuf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(material.data(), material.size())));
    std::string key = keybuf;
    ctx.keys[static_cast<size_t>(s)] = key;

    const fs::path key_path = ctx.out / "cache" / (std::string(stage_name(s)) + ".key");
    bool hit = false;
    if (fs::exists(key_path) && read_file_bytes(key_path.string()) == key) {
      hit = true;
      for (const fs::path& art : artifacts_of(s, cfg, ctx.out))
        if (!fs::exists(art)) {
          hit = false;
          break;
        }
    }
    if (!hit) {
      try {
        execute(ctx, s);
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(s, e.what());
      }
      write_file_bytes(key_path.string(), key);
    }
    ctx.summary.stages.push_back({s, key, hit});
  }

  if (goal == "run") {
    // Cached evaluate still contributes its rows to the summary.
    if (ctx.summary.metrics.empty())
      ctx.summary.metrics =
          metrics_from_csv(read_file_bytes((ctx.out / "metrics.csv").string()));
    write_run_report(ctx);
  }
  return ctx.summary;
}

std::vector<uint32_t> draw_window_indices(uint32_t n_windows, uint32_t k, Rng& rng) {
  if (k == 0 || k > n_windows)
    throw std::invalid_argument("window draw count out of range");
  std::vector<uint32_t> slots(n_windows);
  std::iota(slots.begin(), slots.end(), 0u);
  rng.shuffle(slots);
  slots.resize(k);
  std::sort(slots.begin(), slots.end());
  return slots;
}

TriggerSpec random_window_trigger(double alpha, uint32_t window_len, double kappa_db,
                                  std::vector<uint32_t> window_indices, Rng& rng) {
  if (window_len == 0) throw std::invalid_argument("window_len must be positive");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be non-negative");
  if (window_indices.empty()) throw std::invalid_argument("no window slots given");
  std::vector<cdouble> dir(window_len);
  double norm_sq = 0.0;
  for (cdouble& v : dir) {
    v = rng.cnormal();
    norm_sq += std::norm(v);
  }
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-300) throw std::runtime_error("degenerate random direction");
  TriggerSpec t;
  t.vector.resize(window_len);
  for (uint32_t i = 0; i < window_len; ++i) t.vector[i] = dir[i] * (alpha / norm);
  t.window_indices = std::move(window_indices);
  t.lambda_mix = 0.0;
  t.alpha = alpha;
  t.kappa_db = kappa_db;
  return t;
}

PoisonedDataset baseline_attack(const LabeledDataset& data, uint16_t y_tar, double alpha,
                                uint32_t window_len, uint32_t k, double example_fraction,
                                double rho_h, double kappa_db, uint64_t seed) {
  WindowingSpec spec =
      WindowingSpec::for_symbol(data.manifest.ofdm.symbol_len(), window_len);
  Rng rng(derive_seed(seed, "bltrig"));
  std::vector<uint32_t> sel = draw_window_indices(spec.n_windows, k, rng);
  if (std::isnan(alpha)) {
    std::vector<NormalizedWindow> windows =
        collect_target_windows(data, y_tar, sel[0], spec);
    alpha = pooled_energy_budget(windows, kappa_db).alpha;
  }
  TriggerSpec t = random_window_trigger(alpha, window_len, kappa_db, std::move(sel), rng);
  PoisonPlan plan;
  plan.y_tar = y_tar;
  plan.trigger = std::move(t);
  plan.rho_h = rho_h;
  plan.example_fraction = example_fraction;
  plan.seed = derive_seed(seed, "poison");
  return poison_dataset(data, plan);
}

std::vector<MetricRow> snr_sweep(const ExperimentConfig& cfg, const LabeledDataset& data,
                                 const std::vector<const Model*>& clean_models,
                                 const std::vector<const Model*>& backdoored_models,
                                 const TriggerSpec& trigger, uint64_t eval_seed) {
  if (clean_models.size() != cfg.archs.size() ||
      backdoored_models.size() != cfg.archs.size())
    throw std::invalid_argument("model list does not match cfg.archs");
  const size_t n = std::min<size_t>(cfg.eval_frames, data.n_test());
  if (n == 0) throw std::invalid_argument("no evaluation frames");
  const OfdmConfig& ofdm = data.manifest.ofdm;
  std::vector<uint32_t> all_rows(ofdm.symbols_per_frame);
  std::iota(all_rows.begin(), all_rows.end(), 0u);

  // values[arch][snr] = {asr, alc, abc}
  std::vector<std::vector<std::array<double, 3>>> values(
      cfg.archs.size(), std::vector<std::array<double, 3>>(cfg.eval_snr_db.size()));

  for (size_t si = 0; si < cfg.eval_snr_db.size(); ++si) {
    const double snr = cfg.eval_snr_db[si];
    const ChannelConfig chan = ChannelConfig::exponential(cfg.tap_delays, cfg.tap_decay, snr);
    std::vector<std::vector<float>> clean_x(n), trig_x(n);
    std::vector<const float*> clean_views(n);
    std::vector<uint16_t> labels(n);
    std::vector<const float*> trig_views;
    trig_views.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      const LabeledExample& ex = data.test(i);
      const uint64_t s = derive_seed(eval_seed, "echan", i, si);
      clean_x[i] = rechannel(ex.clean_tx, ofdm, chan, snr, s);
      IqFrame f = inject_at_inference(ex.clean_tx, trigger, all_rows);
      trig_x[i] = rechannel(f, ofdm, chan, snr, s);
      clean_views[i] = clean_x[i].data();
      labels[i] = ex.label;
      if (ex.label != cfg.y_tar) trig_views.push_back(trig_x[i].data());
    }
    if (trig_views.empty())
      throw std::invalid_argument("every evaluation frame belongs to the target class");
    for (size_t ai = 0; ai < cfg.archs.size(); ++ai) {
      values[ai][si][0] = attack_success_rate(*backdoored_models[ai], trig_views, cfg.y_tar);
      values[ai][si][1] = accuracy_percent(*clean_models[ai], clean_views, labels);
      values[ai][si][2] = accuracy_percent(*backdoored_models[ai], clean_views, labels);
    }
  }

  std::vector<MetricRow> rows;
  rows.reserve(cfg.archs.size() * cfg.eval_snr_db.size() * 3);
  const MetricKind kinds[3] = {MetricKind::Asr, MetricKind::Alc, MetricKind::Abc};
  for (size_t ai = 0; ai < cfg.archs.size(); ++ai)
    for (size_t si = 0; si < cfg.eval_snr_db.size(); ++si)
      for (int k = 0; k < 3; ++k)
        rows.push_back({std::string(arch_name(cfg.archs[ai])), cfg.eval_snr_db[si],
                        kinds[k], values[ai][si][k], cfg.master_seed});
  return rows;
}

}  // namespace amcbench
