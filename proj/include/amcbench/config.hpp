#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "amcbench/datastore.hpp"
#include "amcbench/neuralnet.hpp"
#include "amcbench/sigchain.hpp"

namespace amcbench {

enum class TriggerMode : uint8_t { Xai = 0, RandomWindow };

// Everything a full experiment run needs, parsed from a flat key = value
// file. Defaults reproduce the desk-scale setup.
struct ExperimentConfig {
  // dataset.*
  uint32_t n_examples = 12000;
  double train_fraction = 5.0 / 6.0;
  uint64_t dataset_seed = 1234;
  std::vector<double> snr_grid_db{-10.0, 0.0, 10.0, 20.0};
  std::vector<ModulationScheme> classes{
      ModulationScheme::BPSK,  ModulationScheme::QPSK,  ModulationScheme::PSK8,
      ModulationScheme::QAM16, ModulationScheme::QAM64, ModulationScheme::PAM4};

  // ofdm.* / pa.* / channel.*
  OfdmConfig ofdm;
  PaConfig pa;
  std::vector<uint32_t> tap_delays{0, 2, 4};
  double tap_decay = 1.0;

  // train.* / model.*
  TrainConfig train;
  std::vector<Arch> archs{Arch::MLP, Arch::CNN, Arch::GRU};

  // attack.*
  uint16_t y_tar = 0;
  uint32_t window_len = 16;
  uint32_t n_permutations = 100;
  uint32_t symbols_per_class = 24;
  uint32_t bg_pool = 192;
  double bg_target_mix = 0.5;
  uint32_t top_k = 1;
  double lambda_mix = 0.5;
  double kappa_db = -15.0;
  double example_fraction = 0.1;
  double rho_h = 100.0;
  Arch surrogate = Arch::CNN;
  TriggerMode trigger_mode = TriggerMode::Xai;

  // eval.*
  std::vector<double> eval_snr_db{-10.0, 0.0, 10.0, 20.0};
  uint32_t eval_frames = 600;

  // defend.*
  bool strip_on = true;
  bool clustering_on = true;
  bool anomaly_on = true;
  uint32_t strip_overlays = 20;
  uint32_t strip_frames = 200;
  uint32_t anomaly_steps = 200;
  uint32_t anomaly_frames = 32;
  // NaN means "highest entry of eval.snr_grid_db".
  double defend_snr_db = std::numeric_limits<double>::quiet_NaN();
  Arch defend_arch = Arch::CNN;

  // run.*
  uint64_t master_seed = 1;

  uint32_t n_train() const;
  uint32_t n_test() const { return n_examples - n_train(); }
  double resolved_defend_snr() const;
  DatasetManifest dataset_manifest() const;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Strict parser: `key = value` lines, `#` comments, blank lines. Every key
// must be known; an unknown key is an error that names the key path. Keys may
// repeat (last one wins). Throws FormatError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

std::string_view trigger_mode_name(TriggerMode mode);

}  // namespace amcbench
