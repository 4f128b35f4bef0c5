#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "amcbench/common.hpp"
#include "amcbench/datastore.hpp"
#include "amcbench/neuralnet.hpp"
#include "amcbench/sigchain.hpp"

namespace amcbench {

// Window grid over one CP-inserted symbol of N+N_cp samples.
struct WindowingSpec {
  uint32_t window_len = 32;  // N_w
  uint32_t n_windows = 0;    // L

  // Throws if window_len does not divide symbol_len exactly.
  static WindowingSpec for_symbol(size_t symbol_len, uint32_t window_len);
};

// A window rotated so its mean phasor lies on the non-negative real axis.
// The physical samples are samples[n] * e^{j stored_phase}.
struct NormalizedWindow {
  std::vector<cdouble> samples;
  double stored_phase = 0.0;
};

NormalizedWindow phase_normalize(const std::vector<cdouble>& window);
std::vector<cdouble> denormalize(const NormalizedWindow& nw);

std::vector<std::vector<cdouble>> partition(const std::vector<cdouble>& symbol,
                                            const WindowingSpec& spec);

// Replacement pool for masked-out windows. The first n_from_target entries
// were cut from target-class frames, the rest from the other classes.
struct BackgroundSet {
  std::vector<NormalizedWindow> windows;
  double source_mix = 0.0;
  size_t n_from_target = 0;
};

// Draws pool_size windows from the train split, round(mix * pool_size) of
// them from class y_tar. Windows are cut from clean_tx symbols at uniformly
// random (frame, symbol, window) positions and stored phase-normalized.
BackgroundSet build_background(const LabeledDataset& data, uint16_t y_tar,
                               size_t pool_size, double mix,
                               const WindowingSpec& spec, Rng& rng);

// Rebuilds the symbol with mask[l] == 0 windows replaced by the assigned
// background window, re-rotated by the original window's phase. mask[l] == 1
// windows keep their samples bit-for-bit.
std::vector<cdouble> merge_masked_assigned(const std::vector<cdouble>& symbol,
                                           const std::vector<uint8_t>& mask,
                                           const BackgroundSet& bg,
                                           const std::vector<uint32_t>& assignment,
                                           const WindowingSpec& spec);
// Same with a uniform random assignment drawn from rng.
std::vector<cdouble> merge_masked(const std::vector<cdouble>& symbol,
                                  const std::vector<uint8_t>& mask,
                                  const BackgroundSet& bg, Rng& rng);

// Target-class score for a batch of perturbed symbols (physical domain).
using BatchScorer =
    std::function<std::vector<double>(const std::vector<std::vector<cdouble>>&)>;

// Permutation-sampling Shapley estimate for one symbol: n_permutations random
// window orders, each scored over its L+1 prefix coalitions with one shared
// background assignment, so the per-permutation marginals telescope exactly.
std::vector<double> shap_window_scores(const BatchScorer& scorer,
                                       const std::vector<cdouble>& symbol,
                                       const WindowingSpec& spec,
                                       const BackgroundSet& bg,
                                       uint32_t n_permutations, uint64_t seed);

// One symbol lifted out of a stored frame, used as an attribution probe.
struct AttributionSample {
  std::vector<cdouble> symbol;  // clean_tx row, N+N_cp samples
  uint16_t label = 0;
  uint32_t row = 0;  // symbol index inside its frame
};

// Uniformly samples up to per_class (frame, symbol) positions per class from
// the train split. Throws if a class has no frames at all.
std::vector<AttributionSample> collect_attribution_symbols(
    const LabeledDataset& data, uint32_t per_class, Rng& rng);

// Builds the scorer that embeds a candidate symbol at sample.row inside a
// frame whose other rows are filler symbols assembled from background
// windows (each re-rotated by its own stored phase). Fillers are fixed at
// construction, so only the candidate row varies between calls. The frame
// goes through receiver shaping only: no channel, no noise.
BatchScorer make_frame_scorer(const Model& model, const OfdmConfig& ofdm,
                              const AttributionSample& sample,
                              const WindowingSpec& spec,
                              const BackgroundSet& bg, uint16_t y_tar,
                              uint64_t seed);

struct ShapSettings {
  uint32_t n_permutations = 100;  // score estimates per window
  uint32_t top_k = 1;
  uint64_t seed = 1;
};

struct ShapReport {
  std::vector<std::vector<double>> scores;  // [class][window]
  uint32_t n_permutations = 0;
  uint32_t symbols_per_class = 0;
  uint32_t window_len = 0;
  uint16_t target_class = 0;
  std::vector<uint32_t> selected_windows;
};

// Scores every sample with its own frame scorer, averages per true class,
// and selects the top_k windows of the target-class row.
ShapReport sampling_shap(const Model& model, const OfdmConfig& ofdm,
                         const std::vector<AttributionSample>& symbols,
                         uint16_t y_tar, const WindowingSpec& spec,
                         const BackgroundSet& bg, const ShapSettings& settings);

// Top-k indices by score, ties broken toward the lower index.
std::vector<uint32_t> select_window(const std::vector<double>& scores,
                                    uint32_t k);
std::vector<uint32_t> select_window(const ShapReport& report, uint32_t k);

std::string shap_report_to_json(const ShapReport& report);
ShapReport shap_report_from_json(const std::string& text);

}  // namespace amcbench
