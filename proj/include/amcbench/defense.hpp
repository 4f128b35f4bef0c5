#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amcbench/common.hpp"
#include "amcbench/datastore.hpp"
#include "amcbench/neuralnet.hpp"

namespace amcbench {

struct StripResult {
  std::vector<double> clean_entropies;      // mean overlay entropy per input
  std::vector<double> triggered_entropies;
  double entropy_gap = 0.0;    // mean(clean) - mean(triggered)
  double threshold = 0.0;      // entropy below this flags the input
  double detection_rate = 0.0; // percent of triggered inputs flagged
  uint32_t n_overlays = 0;
};

// Blends each input 0.5/0.5 with n_overlays random frames from overlay_pool
// and measures the prediction entropy. The threshold sits at the 5%
// false-positive quantile of the clean entropies.
StripResult strip(const Model& model,
                  const std::vector<const float*>& clean_frames,
                  const std::vector<const float*>& triggered_frames,
                  const std::vector<const float*>& overlay_pool,
                  uint32_t n_overlays, uint64_t seed);

struct ClassClusterOutcome {
  std::array<size_t, 2> sizes = {0, 0};
  std::vector<uint8_t> assignment;  // cluster id per row
  int flagged = -1;                 // smaller cluster when < 35%, else -1
  bool skipped = false;             // fewer than 4 examples
};

// PCA to 10 dimensions, then seeded 2-means. Exposed so synthetic activation
// sets can drive it directly.
ClassClusterOutcome cluster_activations(
    const std::vector<std::vector<float>>& activations, uint64_t seed);

struct ClusterResult {
  std::vector<ClassClusterOutcome> per_class;
  // train indices inside flagged clusters, per class
  std::vector<std::vector<uint32_t>> flagged_examples;
  // share of truly-poisoned examples caught, when ground truth is present
  double flagged_fraction = 0.0;
  bool has_ground_truth = false;
};

// Penultimate activations of every training frame, clustered per class.
ClusterResult activation_clustering(const Model& model,
                                    const LabeledDataset& data, uint64_t seed);

struct ReverseEngineerConfig {
  uint32_t steps = 200;
  double lr = 0.1;
  double beta_init = 1e-3;
  double target_success = 0.99;
  uint64_t seed = 1;
};

struct AnomalyResult {
  std::vector<double> mask_norms;       // L1 per candidate class
  std::vector<double> anomaly_indices;
  std::vector<double> stamped_success;  // fraction driven to the class
  std::vector<uint8_t> diverged;
  double max_index = 0.0;
};

// Per candidate class, optimizes a subcarrier mask (shared across symbol
// rows) and pattern that steer every sample frame into that class, trading
// off mask sparsity via a success-scheduled L1 weight. Classes needing
// abnormally small masks stand out in the MAD-normalized index.
AnomalyResult reverse_engineer_anomaly(const Model& model,
                                       const std::vector<const float*>& frames,
                                       const ReverseEngineerConfig& cfg);

// |norm - median| / (1.4826 * MAD + eps), one index per class.
std::vector<double> anomaly_indices_from_norms(
    const std::vector<double>& norms);

struct DefenseReport {
  std::optional<StripResult> strip;
  std::optional<ClusterResult> clustering;
  std::optional<AnomalyResult> anomaly;
  std::string arch;
  double snr_db = 0.0;
  uint32_t strip_overlays = 20;
  uint32_t anomaly_steps = 200;
};

std::string defense_report_to_json(const DefenseReport& report);

}  // namespace amcbench
