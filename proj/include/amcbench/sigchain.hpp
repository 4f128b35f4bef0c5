#pragma once

#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "amcbench/common.hpp"

namespace amcbench {

// ---------------------------------------------------------------------------
// Modulation schemes. Constellations are unit average power; points are
// indexed by their bit-group value with Gray-coded axes where applicable.
// GFSK/CPFSK are approximated as on-off subcarrier activation (a bit group
// either lights its subcarrier at amplitude sqrt(density^-1) or leaves it
// dark), which preserves unit average power while giving the FSK classes a
// sparse spectral signature.
// ---------------------------------------------------------------------------

enum class ModulationScheme : uint8_t {
  BPSK = 0,
  QPSK,
  PSK8,
  QAM16,
  QAM64,
  PAM4,
  GFSK,
  CPFSK,
};

inline constexpr size_t kNumSchemes = 8;

struct SchemeInfo {
  ModulationScheme scheme;
  int bits_per_symbol;
  std::vector<cdouble> points;  // size 2^bits_per_symbol
};

const SchemeInfo& constellation(ModulationScheme scheme);
std::string_view scheme_name(ModulationScheme scheme);
std::optional<ModulationScheme> scheme_from_name(std::string_view name);

// Maps a bitstream to constellation points, bits_per_symbol bits per point,
// first bit of each group most significant. Throws std::invalid_argument on a
// ragged stream.
std::vector<cdouble> map_symbols(const std::vector<uint8_t>& bits,
                                 ModulationScheme scheme);

// ---------------------------------------------------------------------------
// OFDM frame synthesis.
// ---------------------------------------------------------------------------

struct OfdmConfig {
  uint32_t n_subcarriers = 128;  // N, power of two
  uint32_t cp_len = 32;          // N_cp
  uint32_t symbols_per_frame = 4;  // M

  uint32_t symbol_len() const { return n_subcarriers + cp_len; }
  uint32_t frame_len() const { return symbols_per_frame * symbol_len(); }
  void validate() const;  // throws std::invalid_argument
};

struct PaConfig {
  double rapp_smoothness = 2.0;  // p
  double ibo_db = 3.0;
};

struct ChannelConfig {
  std::vector<uint32_t> tap_delays{0, 2, 4};
  std::vector<double> tap_powers{};  // linear, sums to 1
  double snr_db = 10.0;              // +infinity disables noise

  // Exponential power-decay profile over the given delays, normalized to
  // unit total power: P_i proportional to exp(-delay_i * decay_rate).
  static ChannelConfig exponential(std::vector<uint32_t> delays,
                                   double decay_rate, double snr_db);
  void validate(const OfdmConfig& ofdm) const;
};

struct IqFrame {
  std::vector<std::vector<cdouble>> symbols;  // M vectors of N+N_cp samples
  std::vector<double> per_symbol_phase;       // kappa_m in [0, 2pi)
};

// In-place radix-2 FFT; length must be a power of two. ifft applies the 1/N
// scale so that ifft(fft(x)) == x.
void fft_inplace(std::vector<cdouble>& x);
void ifft_inplace(std::vector<cdouble>& x);

// Per symbol: length-N inverse FFT, prepend the last cp_len time samples,
// rotate the whole CP-inserted symbol by e^{j kappa_m} with kappa_m drawn
// U[0, 2pi) from rng.
IqFrame assemble_frame(const std::vector<std::vector<cdouble>>& freq_grid,
                       const OfdmConfig& cfg, Rng& rng);
IqFrame assemble_frame_with_phases(
    const std::vector<std::vector<cdouble>>& freq_grid, const OfdmConfig& cfg,
    const std::vector<double>& phases);

// Rapp AM/AM compression, phase preserved:
//   |y| = |x| / (1 + (|x|/A_sat)^{2p})^{1/(2p)}
// with A_sat = rms(frame) * 10^{ibo_db/20}.
double rapp_saturation(const IqFrame& frame, const PaConfig& cfg);
IqFrame rapp_pa(const IqFrame& frame, const PaConfig& cfg);

// One block-fading draw: dense FIR of length max_delay+1 with taps
// h_i = CN(0,1) * sqrt(P_i) at the configured delays.
std::vector<cdouble> draw_channel_taps(const ChannelConfig& cfg, Rng& rng);

// Serializes the frame, applies the FIR (truncated to frame length), adds
// complex AWGN scaled to the empirical post-channel signal power, re-splits.
IqFrame apply_channel(const IqFrame& frame, const ChannelConfig& cfg,
                      const OfdmConfig& ofdm, Rng& rng);

// Receiver front end: drop cp_len samples per symbol, keep the N data
// samples. No equalization, no nonlinearity compensation.
std::vector<std::vector<cdouble>> receive_symbols(const IqFrame& frame,
                                                  const OfdmConfig& cfg);
// Same, flattened to the model input layout: M*N*2 floats, real plane then
// imaginary interleaved per sample ([m][n][re,im]).
std::vector<float> receive(const IqFrame& frame, const OfdmConfig& cfg);

inline constexpr double kInfSnr = std::numeric_limits<double>::infinity();

}  // namespace amcbench
