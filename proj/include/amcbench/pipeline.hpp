#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "amcbench/config.hpp"
#include "amcbench/datastore.hpp"
#include "amcbench/metrics.hpp"
#include "amcbench/poisoner.hpp"
#include "amcbench/triggergen.hpp"

namespace amcbench {

enum class Stage : uint8_t {
  Generate = 0,
  TrainClean,
  Attribute,
  Trigger,
  Poison,
  TrainBackdoored,
  Evaluate,
  Defend,
};

std::string_view stage_name(Stage s);

// Any failure inside a stage surfaces as this, message prefixed with the
// stage name, so callers can report where a run died.
struct StageError : std::runtime_error {
  Stage stage;
  StageError(Stage s, const std::string& msg)
      : std::runtime_error("[" + std::string(stage_name(s)) + "] " + msg), stage(s) {}
};

struct StageStatus {
  Stage stage = Stage::Generate;
  std::string key;  // content hash over config slice and upstream keys
  bool cache_hit = false;
};

struct RunSummary {
  std::string out_dir;
  std::vector<StageStatus> stages;
  std::vector<MetricRow> metrics;  // populated once Evaluate has run
};

// Dependency closure for a CLI goal (generate, train, attribute, trigger,
// poison, evaluate, defend, run), in execution order. The trigger stage
// depends on attribution only in xai mode. Throws on an unknown goal.
std::vector<Stage> stages_for_goal(const std::string& goal, const ExperimentConfig& cfg);

// Runs the goal's stages inside out_dir. A stage whose key file matches and
// whose artifacts exist is skipped; everything downstream of a changed stage
// reruns. Artifacts written: dataset.bin, models/<arch>_clean.bin,
// shap_report.json, trigger.json, poisoned.bin, models/<arch>_backdoored.bin,
// metrics.csv, defense_report.json, cache/<stage>.key, and for the "run"
// goal a run_report.json. Nothing in the output carries a timestamp.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                          const std::string& goal = "run");

// ASR/ALC/ABC per (arch, snr) over the test split's first cfg.eval_frames
// frames, regenerated at each grid snr. The clean and the triggered copy of a
// frame share one channel seed, so a zero trigger yields bit-identical
// tensors and ASR equals the model's base rate on clean data. ASR skips
// frames whose true label is already y_tar. Model vectors parallel cfg.archs.
std::vector<MetricRow> snr_sweep(const ExperimentConfig& cfg, const LabeledDataset& data,
                                 const std::vector<const Model*>& clean_models,
                                 const std::vector<const Model*>& backdoored_models,
                                 const TriggerSpec& trigger, uint64_t eval_seed);

// k distinct window slots, uniform without replacement, ascending.
std::vector<uint32_t> draw_window_indices(uint32_t n_windows, uint32_t k, Rng& rng);

// Control trigger: one complex Gaussian direction normalized to alpha,
// stamped at the given window slots. Same shape contract as the guided
// trigger, no attribution involved.
TriggerSpec random_window_trigger(double alpha, uint32_t window_len, double kappa_db,
                                  std::vector<uint32_t> window_indices, Rng& rng);

// Poisons with a random-window trigger. Pass a finite alpha to pin the
// budget (matched-comparison arm); NaN derives it from the target class's
// pooled window rms at the drawn slot, like the guided path does.
PoisonedDataset baseline_attack(const LabeledDataset& data, uint16_t y_tar, double alpha,
                                uint32_t window_len, uint32_t k, double example_fraction,
                                double rho_h, double kappa_db, uint64_t seed);

}  // namespace amcbench
