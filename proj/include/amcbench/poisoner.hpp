#pragma once

#include <cstdint>
#include <vector>

#include "amcbench/common.hpp"
#include "amcbench/datastore.hpp"
#include "amcbench/triggergen.hpp"

namespace amcbench {

struct PoisonPlan {
  uint16_t y_tar = 0;
  TriggerSpec trigger;
  double rho_h = 100.0;          // percent of symbols per frame carrying it
  double example_fraction = 0.1; // fraction of training frames, in (0, 1]
  uint64_t seed = 1;
};

struct PoisonedDataset {
  LabeledDataset data;  // poisoned copy; untouched frames stay bit-identical
  std::vector<uint32_t> poisoned_indices;  // ascending train positions
  PoisonPlan plan;       // with realized rho_h
  double rho_v = 0.0;    // percent of per-symbol samples carrying the trigger
};

// Adds the trigger into its windows, each copy rotated by that window's own
// dominant phase. The result is f32-quantized like every stored frame.
std::vector<cdouble> poison_symbol(const std::vector<cdouble>& symbol,
                                   const TriggerSpec& trigger);

// Inserts the trigger into the symbols listed in rows; everything else is
// untouched. No relabeling; the channel is applied downstream by the caller.
IqFrame inject_at_inference(const IqFrame& frame, const TriggerSpec& trigger,
                            const std::vector<uint32_t>& rows);

// Picks round(example_fraction * n_train) non-target training frames (capped
// by the eligible pool), plants the trigger into a per-frame random symbol
// subset of size round(rho_h/100 * M), relabels to y_tar, and regenerates
// each received tensor with a fresh channel draw at the frame's original snr.
PoisonedDataset poison_dataset(const LabeledDataset& data,
                               const PoisonPlan& plan);

// Fraction of a symbol's samples the trigger occupies, as a percentage.
double rho_v_percent(size_t n_windows_planted, uint32_t window_len,
                     uint32_t n_subcarriers);

}  // namespace amcbench
