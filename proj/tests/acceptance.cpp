// Acceptance gate. Each case prints one  [ACCEPT] <n> <pass|fail>: <detail>
// line and backs it with CHECKs, so ctest fails if any criterion fails while
// the remaining criteria still run and report. Tolerances are pinned here,
// not configurable. Cases share one scratch tree and run in file order; the
// desk-scale run feeds the stealth check, and the per-seed attack runs feed
// the defense check.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amcbench/attribution.hpp"
#include "amcbench/config.hpp"
#include "amcbench/datastore.hpp"
#include "amcbench/defense.hpp"
#include "amcbench/metrics.hpp"
#include "amcbench/neuralnet.hpp"
#include "amcbench/pipeline.hpp"
#include "amcbench/poisoner.hpp"
#include "amcbench/triggergen.hpp"
#include "gradcheck.hpp"
#include "shap_oracle.hpp"

using namespace amcbench;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "amcb_accept" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[ACCEPT] %d %s: %s\n", criterion, ok ? "pass" : "fail",
              detail.c_str());
  std::fflush(stdout);
}

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double metric_at(const std::vector<MetricRow>& rows, const std::string& arch,
                 double snr, MetricKind kind) {
  for (const auto& r : rows)
    if (r.model_arch == arch && r.snr_db == snr && r.metric == kind)
      return r.value;
  return std::numeric_limits<double>::quiet_NaN();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// Results handed from the desk-scale run to the stealth check, and from the
// per-seed attack runs to the defense check.
std::vector<MetricRow> g_desk_metrics;
struct SeedRun {
  uint64_t seed = 0;
  fs::path dir;
  double asr_xai = 0.0;
  double asr_rand = 0.0;
};
std::vector<SeedRun> g_seed_runs;

ExperimentConfig desk_config() { return ExperimentConfig{}; }

std::vector<const float*> train_views(const LabeledDataset& d) {
  std::vector<const float*> xs;
  xs.reserve(d.n_train());
  for (size_t i = 0; i < d.n_train(); ++i) xs.push_back(d.train(i).x.data());
  return xs;
}

std::vector<uint16_t> train_labels(const LabeledDataset& d) {
  std::vector<uint16_t> ys;
  ys.reserve(d.n_train());
  for (size_t i = 0; i < d.n_train(); ++i) ys.push_back(d.train(i).label);
  return ys;
}

}  // namespace

// 1. Permutation-sampling window scores against exhaustive Shapley values on
//    an 8-window symbol, one-entry background pool so both sides see the same
//    deterministic value function.
TEST_CASE("sampling attribution matches exhaustive shapley") {
  const auto t0 = Clock::now();

  DatasetManifest m;
  m.ofdm.n_subcarriers = 64;
  m.ofdm.cp_len = 16;
  m.ofdm.symbols_per_frame = 2;
  m.channel = ChannelConfig::exponential({0, 2, 4}, 1.0, 10.0);
  m.classes = {ModulationScheme::BPSK, ModulationScheme::QPSK,
               ModulationScheme::QAM16};
  m.n_train = 300;
  m.n_test = 60;
  m.master_seed = 555;
  m.snr_grid_db = {10.0};
  const LabeledDataset data = generate_dataset(m);

  ModelConfig mc;
  mc.arch = Arch::CNN;
  mc.symbols_per_frame = 2;
  mc.n_subcarriers = 64;
  mc.n_classes = 3;
  Model model(mc);
  model.init_params(1);
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 32;
  tc.seed = 2;
  train(model, train_views(data), train_labels(data), tc);

  const auto spec = WindowingSpec::for_symbol(m.ofdm.symbol_len(), 10);
  REQUIRE(spec.n_windows == 8);
  Rng bg_rng(derive_seed(9, "bg"));
  const BackgroundSet bg = build_background(data, 0, 1, 1.0, spec, bg_rng);

  AttributionSample sample;
  for (size_t i = 0; i < data.n_train(); ++i)
    if (data.train(i).label == 1) {
      sample.symbol = data.train(i).clean_tx.symbols[0];
      sample.label = 1;
      sample.row = 0;
      break;
    }
  REQUIRE(!sample.symbol.empty());

  const BatchScorer scorer =
      make_frame_scorer(model, m.ofdm, sample, spec, bg, 0, derive_seed(9, "sc"));

  const std::vector<uint32_t> assign(spec.n_windows, 0);
  const auto value = [&](const std::vector<uint8_t>& mask) {
    return scorer({merge_masked_assigned(sample.symbol, mask, bg, assign, spec)})[0];
  };
  const std::vector<double> exact =
      testutil::exact_shapley(value, spec.n_windows);
  const std::vector<double> est =
      shap_window_scores(scorer, sample.symbol, spec, bg, 2000, derive_seed(9, "sh"));

  double mae = 0.0;
  for (uint32_t l = 0; l < spec.n_windows; ++l) mae += std::abs(est[l] - exact[l]);
  mae /= spec.n_windows;
  const double secs = elapsed_s(t0);

  const bool ok = mae <= 0.05 && secs < 60.0;
  report(1, ok, fmt("mae %.4f (cap 0.05), %.1fs (cap 60s), 2000 permutations vs 2^8 oracle", mae, secs));
  CHECK(mae <= 0.05);
  CHECK(secs < 60.0);
}

// 2. Analytic parameter and input gradients against central finite
//    differences, double precision, reduced widths, all three cores.
TEST_CASE("backprop matches finite differences on every core") {
  const auto t0 = Clock::now();
  const double cap = 1e-4;

  const auto r_mlp = testutil::gradcheck(testutil::small_mlp(), 32, 5, 11);
  const auto r_cnn = testutil::gradcheck(testutil::small_cnn(), 48, 5, 12);
  const auto r_gru = testutil::gradcheck(testutil::small_gru(), 24, 5, 13);
  const double secs = elapsed_s(t0);

  const double worst =
      std::max({r_mlp.param_rel_err, r_mlp.input_rel_err, r_cnn.param_rel_err,
                r_cnn.input_rel_err, r_gru.param_rel_err, r_gru.input_rel_err});
  const bool ok = worst < cap && secs < 120.0;
  report(2, ok,
         fmt("rel err mlp %.2e/%.2e cnn %.2e/%.2e gru %.2e/%.2e (cap 1e-4), %.1fs (cap 120s)",
             r_mlp.param_rel_err, r_mlp.input_rel_err, r_cnn.param_rel_err,
             r_cnn.input_rel_err, r_gru.param_rel_err, r_gru.input_rel_err, secs));
  CHECK(r_mlp.param_rel_err < cap);
  CHECK(r_mlp.input_rel_err < cap);
  CHECK(r_cnn.param_rel_err < cap);
  CHECK(r_cnn.input_rel_err < cap);
  CHECK(r_gru.param_rel_err < cap);
  CHECK(r_gru.input_rel_err < cap);
  CHECK(secs < 120.0);
}

// 6. Trigger norm and the closed-form endpoints of the mixing weight.
TEST_CASE("composed trigger keeps its energy budget") {
  Rng rng(404);
  const uint32_t len = 16;
  std::vector<cdouble> base(len);
  for (auto& v : base) v = 1.2 * rng.cnormal() + cdouble(0.8, -0.3);
  std::vector<NormalizedWindow> windows;
  for (int i = 0; i < 60; ++i) {
    std::vector<cdouble> w(len);
    for (uint32_t j = 0; j < len; ++j) w[j] = base[j] + 0.35 * rng.cnormal();
    windows.push_back(phase_normalize(w));
  }
  const ClassStats stats = target_class_stats(windows);

  const auto norm2 = [](const std::vector<cdouble>& v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
  };

  double worst_norm = 0.0;
  for (const double lambda : {0.0, 0.25, 0.5, 0.75, 1.0})
    for (const double kappa : {-18.0, -12.0, -6.0, 0.0}) {
      const EnergyBudget b = pooled_energy_budget(windows, kappa);
      REQUIRE(!b.silent);
      const TriggerSpec t = compose_trigger(stats, lambda, b.alpha, kappa);
      worst_norm = std::max(worst_norm, std::abs(norm2(t.vector) - b.alpha));
    }
  for (const double alpha : {0.01, 0.1, 1.0, 10.0}) {
    const TriggerSpec t = compose_trigger(stats, 0.5, alpha, 0.0);
    worst_norm = std::max(worst_norm, std::abs(norm2(t.vector) - alpha));
  }

  // lambda 0 is the unit principal direction scaled by alpha; lambda 1 is the
  // prototype rescaled to alpha.
  const double alpha = pooled_energy_budget(windows, -12.0).alpha;
  double worst_end = 0.0;
  {
    const TriggerSpec t = compose_trigger(stats, 0.0, alpha, -12.0);
    for (uint32_t j = 0; j < len; ++j)
      worst_end = std::max(worst_end,
                           std::abs(t.vector[j] - alpha * stats.principal[j]));
  }
  {
    const TriggerSpec t = compose_trigger(stats, 1.0, alpha, -12.0);
    const double pn = norm2(stats.prototype);
    REQUIRE(pn > 0.0);
    for (uint32_t j = 0; j < len; ++j)
      worst_end = std::max(
          worst_end, std::abs(t.vector[j] - alpha * stats.prototype[j] / pn));
  }

  const bool ok = worst_norm <= 1e-9 && worst_end <= 1e-9;
  report(6, ok,
         fmt("norm drift %.2e over 24 (lambda,kappa,alpha) points, endpoint drift %.2e (cap 1e-9)",
             worst_norm, worst_end));
  CHECK(worst_norm <= 1e-9);
  CHECK(worst_end <= 1e-9);
}

// 7. Phase normalization: amplitudes untouched, mean phasor rotated onto the
//    non-negative real axis, rotation invertible.
TEST_CASE("phase normalization preserves amplitudes and inverts") {
  Rng rng(123);
  const uint32_t len = 16;
  double worst_amp = 0.0, worst_imag = 0.0, min_real = 0.0, worst_rt = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double scale = rng.uniform(0.1, 3.0);
    std::vector<cdouble> w(len);
    for (auto& v : w) v = scale * rng.cnormal();

    const NormalizedWindow nw = phase_normalize(w);
    cdouble mean{0.0, 0.0};
    for (uint32_t j = 0; j < len; ++j) {
      worst_amp = std::max(worst_amp,
                           std::abs(std::abs(nw.samples[j]) - std::abs(w[j])));
      mean += nw.samples[j];
    }
    mean /= static_cast<double>(len);
    worst_imag = std::max(worst_imag, std::abs(mean.imag()));
    min_real = std::min(min_real, mean.real());

    const std::vector<cdouble> back = denormalize(nw);
    for (uint32_t j = 0; j < len; ++j)
      worst_rt = std::max(worst_rt, std::abs(back[j] - w[j]));
  }

  const bool ok = worst_amp <= 1e-12 && worst_imag <= 1e-12 &&
                  min_real >= -1e-12 && worst_rt <= 1e-12;
  report(7, ok,
         fmt("10^4 windows: amp drift %.2e, |Im mean| %.2e, min Re mean %.2e, round-trip %.2e (caps 1e-12)",
             worst_amp, worst_imag, min_real, worst_rt));
  CHECK(worst_amp <= 1e-12);
  CHECK(worst_imag <= 1e-12);
  CHECK(min_real >= -1e-12);
  CHECK(worst_rt <= 1e-12);
}

// 4. Desk-scale pipeline: success rate climbs with snr, clears 60% at the top
//    of the grid, and the whole run stays under half an hour.
TEST_CASE("attack success rises with snr at desk scale") {
  const auto t0 = Clock::now();
  ExperimentConfig cfg = desk_config();
  cfg.master_seed = 1;
  const fs::path dir = fresh_dir("desk");

  RunSummary sum = run_experiment(cfg, dir.string(), "run");
  const double secs = elapsed_s(t0);
  g_desk_metrics = sum.metrics;

  std::vector<double> snrs, asrs;
  for (const double s : cfg.eval_snr_db) {
    snrs.push_back(s);
    asrs.push_back(metric_at(sum.metrics, "cnn", s, MetricKind::Asr));
  }
  const double rho = spearman(snrs, asrs);
  const double top = asrs.back();

  const bool ok = rho > 0.0 && top >= 60.0 && secs < 1800.0;
  report(4, ok,
         fmt("cnn asr %.1f/%.1f/%.1f/%.1f%% over {-10,0,10,20} dB, spearman %.2f (>0), top %.1f%% (>=60), %.0fs (cap 1800s)",
             asrs[0], asrs[1], asrs[2], asrs[3], rho, top, secs));
  CHECK(rho > 0.0);
  CHECK(top >= 60.0);
  CHECK(secs < 1800.0);
}

// 3. Stealth: backdoored and clean accuracy stay within 3 points of each
//    other for every architecture across the low and mid grid.
TEST_CASE("poisoned models keep clean accuracy") {
  REQUIRE_MESSAGE(!g_desk_metrics.empty(), "desk-scale run produced no metrics");
  double worst = 0.0;
  std::string worst_at = "-";
  for (const char* arch : {"mlp", "cnn", "gru"})
    for (const double snr : {-10.0, 0.0, 10.0}) {
      const double alc = metric_at(g_desk_metrics, arch, snr, MetricKind::Alc);
      const double abc = metric_at(g_desk_metrics, arch, snr, MetricKind::Abc);
      REQUIRE(std::isfinite(alc));
      REQUIRE(std::isfinite(abc));
      const double gap = std::abs(abc - alc);
      if (gap > worst) {
        worst = gap;
        worst_at = fmt("%s @ %g dB", arch, snr);
      }
    }
  const bool ok = worst <= 3.0;
  report(3, ok, fmt("max |ABC-ALC| %.2f points at %s (cap 3.00)", worst, worst_at.c_str()));
  CHECK(worst <= 3.0);
}

// 5. Guided window choice against a random-window control at the bottom of
//    the snr grid. The arms are fully paired: same dataset, same clean
//    surrogate, same poisoned-frame subset, same init and shuffle seeds, same
//    evaluation channel stream. Only the trigger (content and placement)
//    differs, so the comparison isolates the window guidance. Majority over
//    three seeds. Each arm's y_tar base rate (zero-amplitude trigger on the
//    paired channel stream) is reported alongside; when the trigger sits
//    below the channel noise, asr collapses onto that base rate and this
//    comparison degenerates into prediction-bias noise between two equally
//    blind models.
TEST_CASE("guided trigger beats the random-window control") {
  int wins = 0;
  std::string detail;
  for (const uint64_t seed : {1ull, 2ull, 3ull}) {
    ExperimentConfig cfg = desk_config();
    cfg.archs = {Arch::CNN};
    cfg.master_seed = seed;
    const fs::path dir = fresh_dir(fmt("xai_seed%llu", (unsigned long long)seed));
    RunSummary sum = run_experiment(cfg, dir.string(), "run");
    const double asr_xai =
        metric_at(sum.metrics, "cnn", cfg.eval_snr_db.front(), MetricKind::Asr);

    // Control arm: the exact alpha the guided trigger got. Passing the master
    // seed reuses the pipeline's poison tag, so the same frames are poisoned.
    const TriggerSpec guided = trigger_from_json(slurp(dir / "trigger.json"));
    const LabeledDataset data = load_dataset((dir / "dataset.bin").string());
    const PoisonedDataset pd = baseline_attack(
        data, cfg.y_tar, guided.alpha, cfg.window_len, cfg.top_k,
        cfg.example_fraction, cfg.rho_h, cfg.kappa_db, seed);

    ModelConfig mc;
    mc.arch = Arch::CNN;
    mc.symbols_per_frame = cfg.ofdm.symbols_per_frame;
    mc.n_subcarriers = cfg.ofdm.n_subcarriers;
    mc.n_classes = static_cast<uint32_t>(cfg.classes.size());
    Model bd(mc);
    bd.init_params(derive_seed(seed, "init_bd", static_cast<uint64_t>(Arch::CNN)));
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, "train_bd", static_cast<uint64_t>(Arch::CNN));
    train(bd, train_views(pd.data), train_labels(pd.data), tc);

    const Model clean = load_model((dir / "models" / "cnn_clean.bin").string());
    const Model bd_xai =
        load_model((dir / "models" / "cnn_backdoored.bin").string());
    ExperimentConfig low = cfg;
    low.eval_snr_db = {cfg.eval_snr_db.front()};
    const uint64_t eval_seed = derive_seed(seed, "eval");
    const auto rows = snr_sweep(low, data, {&clean}, {&bd}, pd.plan.trigger,
                                eval_seed);
    const double asr_rand =
        metric_at(rows, "cnn", low.eval_snr_db[0], MetricKind::Asr);

    TriggerSpec zero = guided;
    for (auto& v : zero.vector) v = 0.0;
    zero.alpha = 0.0;
    const auto base_x = snr_sweep(low, data, {&clean}, {&bd_xai}, zero, eval_seed);
    const auto base_r = snr_sweep(low, data, {&clean}, {&bd}, zero, eval_seed);

    if (asr_xai >= asr_rand) ++wins;
    detail += fmt("seed %llu: %.1f%% (base %.1f) vs %.1f%% (base %.1f, w%u); ",
                  (unsigned long long)seed, asr_xai,
                  metric_at(base_x, "cnn", low.eval_snr_db[0], MetricKind::Asr),
                  asr_rand,
                  metric_at(base_r, "cnn", low.eval_snr_db[0], MetricKind::Asr),
                  pd.plan.trigger.window_indices[0]);
    g_seed_runs.push_back({seed, dir, asr_xai, asr_rand});
  }
  const bool ok = wins >= 2;
  report(5, ok, fmt("%sguided wins %d/3 at -10 dB (need 2)", detail.c_str(), wins));
  CHECK(wins >= 2);
}

// 8. Defenses notice a loud attack and miss the quiet one. The quiet arm
//    reuses the per-seed guided runs; the loud arm re-poisons at triple the
//    fraction and nine dB more trigger energy.
TEST_CASE("defenses catch the loud attack and miss the quiet one") {
  REQUIRE_MESSAGE(!g_seed_runs.empty(), "guided runs missing");

  int quiet_ok = 0;
  std::string detail;
  for (const SeedRun& run : g_seed_runs) {
    const auto j = nlohmann::json::parse(slurp(run.dir / "defense_report.json"));
    const double anomaly = j["anomaly"]["anomaly_indices"][0].get<double>();
    const double caught =
        j["activation_clustering"]["flagged_fraction"].get<double>();
    const bool pass = anomaly < 2.0 && caught < 35.0;
    if (pass) ++quiet_ok;
    detail += fmt("seed %llu: idx %.2f flag %.0f%%; ",
                  (unsigned long long)run.seed, anomaly, caught);
  }

  ExperimentConfig loud = desk_config();
  loud.archs = {Arch::CNN};
  loud.master_seed = 1;
  loud.example_fraction = 0.3;
  loud.kappa_db = -6.0;
  const fs::path dir = fresh_dir("overpoisoned");
  run_experiment(loud, dir.string(), "defend");
  const auto j = nlohmann::json::parse(slurp(dir / "defense_report.json"));
  const double gap = j["strip"]["entropy_gap"].get<double>();
  const double loud_anomaly = j["anomaly"]["anomaly_indices"][0].get<double>();

  const bool ok = quiet_ok >= 2 && gap > 0.0 && loud_anomaly > 2.0;
  report(8, ok,
         fmt("quiet arm %d/3 under the radar (%s); loud arm dH %.3f (>0), index %.2f (>2)",
             quiet_ok, detail.c_str(), gap, loud_anomaly));
  CHECK(quiet_ok >= 2);
  CHECK(gap > 0.0);
  CHECK(loud_anomaly > 2.0);
}

// 9. Same master seed, fresh directories: every text artifact byte-identical.
TEST_CASE("repeated runs are byte identical") {
  ExperimentConfig cfg = desk_config();
  cfg.n_examples = 2400;
  cfg.archs = {Arch::MLP, Arch::CNN};
  cfg.symbols_per_class = 12;
  cfg.bg_pool = 96;
  cfg.train.epochs = 6;
  cfg.eval_frames = 200;
  cfg.strip_frames = 100;
  cfg.anomaly_steps = 80;
  cfg.anomaly_frames = 16;
  cfg.master_seed = 7;

  const fs::path a = fresh_dir("rep_a");
  const fs::path b = fresh_dir("rep_b");
  run_experiment(cfg, a.string(), "run");
  run_experiment(cfg, b.string(), "run");

  std::string mismatched;
  for (const char* f : {"metrics.csv", "run_report.json", "defense_report.json",
                        "shap_report.json", "trigger.json"}) {
    if (slurp(a / f) != slurp(b / f)) mismatched += std::string(f) + " ";
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }
  const bool ok = mismatched.empty();
  report(9, ok,
         ok ? "metrics.csv, run_report.json, defense_report.json, shap_report.json, trigger.json all byte-identical across fresh runs"
            : "differs: " + mismatched);
}
