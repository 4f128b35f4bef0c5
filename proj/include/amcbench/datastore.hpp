#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "amcbench/common.hpp"
#include "amcbench/sigchain.hpp"

namespace amcbench {

// Populated on poisoned datasets so downstream stages (and defenses that need
// ground truth) can identify the planted examples.
struct PoisonMetadata {
  uint32_t y_tar = 0;
  std::string trigger_id;                 // content hash of the trigger spec
  std::vector<uint32_t> poisoned_indices;  // positions within the train split
};

struct DatasetManifest {
  OfdmConfig ofdm;
  ChannelConfig channel;
  PaConfig pa;
  std::vector<ModulationScheme> classes;
  uint32_t n_train = 0;
  uint32_t n_test = 0;
  uint64_t master_seed = 0;
  // When nonempty, each frame's channel SNR is drawn uniformly from this
  // grid instead of using channel.snr_db (mixed-SNR training corpus).
  std::vector<double> snr_grid_db;
  std::optional<PoisonMetadata> poison;

  void validate() const;
};

struct LabeledExample {
  std::vector<float> x;   // received tensor, M*N*2
  uint16_t label = 0;
  IqFrame clean_tx;       // post-PA physical frame, f32-quantized payload
  uint64_t frame_seed = 0;
  float snr_db = 0.0f;    // realized channel snr for this frame
};

struct LabeledDataset {
  DatasetManifest manifest;
  std::vector<LabeledExample> examples;  // train split first, then test

  size_t n_train() const { return manifest.n_train; }
  size_t n_test() const { return manifest.n_test; }
  const LabeledExample& train(size_t i) const { return examples[i]; }
  const LabeledExample& test(size_t i) const {
    return examples[manifest.n_train + i];
  }
};

// Synthesizes the full corpus: labels assigned round-robin over the class
// list (balance within one example), every frame a pure function of
// (master_seed, index).
LabeledDataset generate_dataset(const DatasetManifest& manifest);

// Regenerates the received tensor of one already-synthesized frame with a
// fresh channel realization at the given snr. Used by the poisoner and by
// per-snr evaluation; the channel stream is fully determined by chan_seed.
std::vector<float> rechannel(const IqFrame& clean_tx, const OfdmConfig& ofdm,
                             const ChannelConfig& channel, double snr_db,
                             uint64_t chan_seed);

// Binary container (magic "AMCB") plus a <path>.manifest.json sidecar.
void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

// Whole-file helpers shared by the other binary formats.
std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::string& bytes);

}  // namespace amcbench
