#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amcbench/attribution.hpp"
#include "amcbench/common.hpp"
#include "amcbench/datastore.hpp"

namespace amcbench {

// The additive waveform planted into the selected windows.
struct TriggerSpec {
  std::vector<cdouble> vector;          // t, length N_w, ||t||_2 == alpha
  std::vector<uint32_t> window_indices; // placement within the symbol
  double lambda_mix = 0.5;
  double alpha = 0.0;
  double kappa_db = 0.0;
};

// Summary of the target class at the chosen window position.
struct ClassStats {
  std::vector<cdouble> prototype;  // element-wise marginal complex median
  std::vector<cdouble> principal;  // top PCA direction, unit norm
  size_t n_windows_used = 0;
};

// Every phase-normalized window at window_index across all target-class
// train symbols (M windows per frame).
std::vector<NormalizedWindow> collect_target_windows(const LabeledDataset& data,
                                                     uint16_t y_tar,
                                                     uint32_t window_index,
                                                     const WindowingSpec& spec);

// Independent medians of the real and imaginary parts per sample index.
std::vector<cdouble> complex_median_prototype(
    const std::vector<NormalizedWindow>& windows);

// Stacks [Re, Im] rows, mean-centers, and power-iterates the covariance from
// a fixed start until 1e-10. The sign is fixed so Re<p, prototype> >= 0.
std::vector<cdouble> first_principal_component(
    const std::vector<NormalizedWindow>& windows,
    const std::vector<cdouble>& prototype);

ClassStats target_class_stats(const std::vector<NormalizedWindow>& windows);

// t = alpha * (lambda*prototype + (1-lambda)*principal) / ||mixture||.
// The prototype enters unnormalized; only the mixture is rescaled.
TriggerSpec compose_trigger(const ClassStats& stats, double lambda_mix,
                            double alpha, double kappa_db = 0.0,
                            std::vector<uint32_t> window_indices = {});

struct EnergyBudget {
  double alpha = 0.0;
  bool silent = false;  // the reference window carried no energy
};

// alpha = 10^{kappa_db/20} * RMS(window).
EnergyBudget energy_budget_alpha(const std::vector<cdouble>& window,
                                 double kappa_db);
// Same RMS pooled over every sample of every collected window, so one alpha
// serves the whole campaign.
EnergyBudget pooled_energy_budget(const std::vector<NormalizedWindow>& windows,
                                  double kappa_db);

std::string trigger_to_json(const TriggerSpec& spec);
TriggerSpec trigger_from_json(const std::string& text);
// Content hash of the serialized trigger, used as its identifier in
// poisoned-dataset metadata.
std::string trigger_content_id(const TriggerSpec& spec);

}  // namespace amcbench
