#include "amcbench/sigchain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amcbench {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

std::vector<cdouble> gray_psk(int bits) {
  const int n = 1 << bits;
  std::vector<cdouble> pts(n);
  for (int k = 0; k < n; ++k) {
    const int g = k ^ (k >> 1);
    const double a = kTwoPi * g / n;
    pts[k] = {std::cos(a), std::sin(a)};
  }
  return pts;
}

// Gray-coded PAM levels indexed by bit-group value.
constexpr double kPam4Levels[4] = {-3.0, -1.0, 3.0, 1.0};
constexpr double kPam8Levels[8] = {-7.0, -5.0, -1.0, -3.0, 7.0, 5.0, 1.0, 3.0};

std::vector<cdouble> square_qam(int bits_per_axis, double scale) {
  const double* levels = bits_per_axis == 2 ? kPam4Levels : kPam8Levels;
  const int per_axis = 1 << bits_per_axis;
  std::vector<cdouble> pts(per_axis * per_axis);
  for (int i = 0; i < per_axis; ++i)
    for (int q = 0; q < per_axis; ++q)
      pts[(i << bits_per_axis) | q] = cdouble(levels[i], levels[q]) * scale;
  return pts;
}

SchemeInfo make_scheme(ModulationScheme s) {
  switch (s) {
    case ModulationScheme::BPSK:
      return {s, 1, {cdouble(1, 0), cdouble(-1, 0)}};
    case ModulationScheme::QPSK: {
      const double r = 1.0 / std::sqrt(2.0);
      return {s, 2, {{r, r}, {r, -r}, {-r, r}, {-r, -r}}};
    }
    case ModulationScheme::PSK8:
      return {s, 3, gray_psk(3)};
    case ModulationScheme::QAM16:
      return {s, 4, square_qam(2, 1.0 / std::sqrt(10.0))};
    case ModulationScheme::QAM64:
      return {s, 6, square_qam(3, 1.0 / std::sqrt(42.0))};
    case ModulationScheme::PAM4: {
      const double r = 1.0 / std::sqrt(5.0);
      std::vector<cdouble> pts(4);
      for (int k = 0; k < 4; ++k) pts[k] = {kPam4Levels[k] * r, 0.0};
      return {s, 2, pts};
    }
    case ModulationScheme::GFSK:
      // On-off activation, density 1/2: mean power (2+0)/2 = 1.
      return {s, 1, {cdouble(std::sqrt(2.0), 0), cdouble(0, 0)}};
    case ModulationScheme::CPFSK:
      // Density 1/4, amplitude 2: mean power 4/4 = 1.
      return {s, 2, {cdouble(2, 0), cdouble(0, 0), cdouble(0, 0), cdouble(0, 0)}};
  }
  throw std::invalid_argument("unknown modulation scheme");
}

const char* kSchemeNames[kNumSchemes] = {"BPSK",  "QPSK",  "PSK8", "QAM16",
                                         "QAM64", "PAM4",  "GFSK", "CPFSK"};

}  // namespace

const SchemeInfo& constellation(ModulationScheme scheme) {
  static const std::vector<SchemeInfo> table = [] {
    std::vector<SchemeInfo> t;
    for (size_t i = 0; i < kNumSchemes; ++i)
      t.push_back(make_scheme(static_cast<ModulationScheme>(i)));
    return t;
  }();
  const auto idx = static_cast<size_t>(scheme);
  if (idx >= kNumSchemes) throw std::invalid_argument("unknown modulation scheme");
  return table[idx];
}

std::string_view scheme_name(ModulationScheme scheme) {
  const auto idx = static_cast<size_t>(scheme);
  if (idx >= kNumSchemes) throw std::invalid_argument("unknown modulation scheme");
  return kSchemeNames[idx];
}

std::optional<ModulationScheme> scheme_from_name(std::string_view name) {
  for (size_t i = 0; i < kNumSchemes; ++i)
    if (name == kSchemeNames[i]) return static_cast<ModulationScheme>(i);
  return std::nullopt;
}

std::vector<cdouble> map_symbols(const std::vector<uint8_t>& bits,
                                 ModulationScheme scheme) {
  const SchemeInfo& info = constellation(scheme);
  if (bits.size() % info.bits_per_symbol != 0)
    throw std::invalid_argument("bitstream length not divisible by bits_per_symbol");
  std::vector<cdouble> out;
  out.reserve(bits.size() / info.bits_per_symbol);
  for (size_t i = 0; i < bits.size(); i += info.bits_per_symbol) {
    uint32_t idx = 0;
    for (int b = 0; b < info.bits_per_symbol; ++b)
      idx = (idx << 1) | (bits[i + b] & 1u);
    out.push_back(info.points[idx]);
  }
  return out;
}

void OfdmConfig::validate() const {
  if (n_subcarriers == 0 || (n_subcarriers & (n_subcarriers - 1)) != 0)
    throw std::invalid_argument("n_subcarriers must be a nonzero power of two");
  if (symbols_per_frame == 0)
    throw std::invalid_argument("symbols_per_frame must be positive");
  if (cp_len > n_subcarriers)
    throw std::invalid_argument("cp_len cannot exceed n_subcarriers");
}

ChannelConfig ChannelConfig::exponential(std::vector<uint32_t> delays,
                                         double decay_rate, double snr_db) {
  ChannelConfig cfg;
  cfg.tap_delays = std::move(delays);
  cfg.snr_db = snr_db;
  cfg.tap_powers.resize(cfg.tap_delays.size());
  double total = 0.0;
  for (size_t i = 0; i < cfg.tap_delays.size(); ++i) {
    cfg.tap_powers[i] = std::exp(-decay_rate * cfg.tap_delays[i]);
    total += cfg.tap_powers[i];
  }
  for (auto& p : cfg.tap_powers) p /= total;
  return cfg;
}

void ChannelConfig::validate(const OfdmConfig& ofdm) const {
  if (tap_delays.empty() || tap_delays.size() != tap_powers.size())
    throw std::invalid_argument("channel taps and powers must align and be nonempty");
  for (size_t i = 0; i + 1 < tap_delays.size(); ++i)
    if (tap_delays[i] >= tap_delays[i + 1])
      throw std::invalid_argument("tap delays must be strictly increasing");
  if (tap_delays.back() >= ofdm.cp_len)
    throw std::invalid_argument("max tap delay must be below cp_len");
  double total = 0.0;
  for (double p : tap_powers) {
    if (p <= 0.0) throw std::invalid_argument("tap powers must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("tap powers must sum to 1");
}

namespace {

// Iterative radix-2 Cooley-Tukey, decimation in time.
void fft_core(std::vector<cdouble>& x, bool inverse) {
  const size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("FFT length must be a nonzero power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    const cdouble wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const cdouble u = x[i + k];
        const cdouble v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace

void fft_inplace(std::vector<cdouble>& x) { fft_core(x, false); }

void ifft_inplace(std::vector<cdouble>& x) {
  fft_core(x, true);
  const double inv = 1.0 / static_cast<double>(x.size());
  for (auto& v : x) v *= inv;
}

static IqFrame assemble_impl(const std::vector<std::vector<cdouble>>& grid,
                             const OfdmConfig& cfg,
                             const std::vector<double>& phases) {
  cfg.validate();
  if (grid.size() != cfg.symbols_per_frame)
    throw std::invalid_argument("frequency grid row count != symbols_per_frame");
  IqFrame frame;
  frame.symbols.reserve(grid.size());
  frame.per_symbol_phase = phases;
  for (size_t m = 0; m < grid.size(); ++m) {
    if (grid[m].size() != cfg.n_subcarriers)
      throw std::invalid_argument("frequency grid column count != n_subcarriers");
    std::vector<cdouble> t = grid[m];
    ifft_inplace(t);
    std::vector<cdouble> sym(cfg.symbol_len());
    std::copy(t.end() - cfg.cp_len, t.end(), sym.begin());
    std::copy(t.begin(), t.end(), sym.begin() + cfg.cp_len);
    const cdouble rot(std::cos(phases[m]), std::sin(phases[m]));
    for (auto& v : sym) v *= rot;
    frame.symbols.push_back(std::move(sym));
  }
  return frame;
}

IqFrame assemble_frame(const std::vector<std::vector<cdouble>>& freq_grid,
                       const OfdmConfig& cfg, Rng& rng) {
  std::vector<double> phases(freq_grid.size());
  for (auto& p : phases) p = rng.uniform(0.0, kTwoPi);
  return assemble_impl(freq_grid, cfg, phases);
}

IqFrame assemble_frame_with_phases(
    const std::vector<std::vector<cdouble>>& freq_grid, const OfdmConfig& cfg,
    const std::vector<double>& phases) {
  if (phases.size() != freq_grid.size())
    throw std::invalid_argument("phase count != symbol count");
  return assemble_impl(freq_grid, cfg, phases);
}

static double frame_rms(const IqFrame& frame) {
  double acc = 0.0;
  size_t n = 0;
  for (const auto& sym : frame.symbols) {
    for (const auto& v : sym) acc += std::norm(v);
    n += sym.size();
  }
  return n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
}

double rapp_saturation(const IqFrame& frame, const PaConfig& cfg) {
  return frame_rms(frame) * std::pow(10.0, cfg.ibo_db / 20.0);
}

IqFrame rapp_pa(const IqFrame& frame, const PaConfig& cfg) {
  if (cfg.rapp_smoothness <= 0.0)
    throw std::invalid_argument("rapp smoothness must be positive");
  const double a_sat = rapp_saturation(frame, cfg);
  IqFrame out = frame;
  if (a_sat == 0.0) return out;  // silent frame, nothing to compress
  const double p2 = 2.0 * cfg.rapp_smoothness;
  for (auto& sym : out.symbols)
    for (auto& v : sym) {
      const double mag = std::abs(v);
      if (mag == 0.0) continue;
      v /= std::pow(1.0 + std::pow(mag / a_sat, p2), 1.0 / p2);
    }
  return out;
}

std::vector<cdouble> draw_channel_taps(const ChannelConfig& cfg, Rng& rng) {
  std::vector<cdouble> fir(cfg.tap_delays.back() + 1, cdouble(0, 0));
  for (size_t i = 0; i < cfg.tap_delays.size(); ++i)
    fir[cfg.tap_delays[i]] = rng.cnormal() * std::sqrt(cfg.tap_powers[i]);
  return fir;
}

IqFrame apply_channel(const IqFrame& frame, const ChannelConfig& cfg,
                      const OfdmConfig& ofdm, Rng& rng) {
  cfg.validate(ofdm);
  const std::vector<cdouble> fir = draw_channel_taps(cfg, rng);

  std::vector<cdouble> serial;
  serial.reserve(ofdm.frame_len());
  for (const auto& sym : frame.symbols)
    serial.insert(serial.end(), sym.begin(), sym.end());

  std::vector<cdouble> faded(serial.size(), cdouble(0, 0));
  for (size_t d = 0; d < fir.size(); ++d) {
    if (fir[d] == cdouble(0, 0)) continue;
    for (size_t i = d; i < serial.size(); ++i) faded[i] += fir[d] * serial[i - d];
  }

  if (std::isfinite(cfg.snr_db)) {
    double sig_power = 0.0;
    for (const auto& v : faded) sig_power += std::norm(v);
    sig_power /= static_cast<double>(faded.size());
    const double noise_power = sig_power / std::pow(10.0, cfg.snr_db / 10.0);
    const double sigma = std::sqrt(noise_power);
    for (auto& v : faded) v += sigma * rng.cnormal();
  }

  IqFrame out;
  out.per_symbol_phase = frame.per_symbol_phase;
  const size_t sym_len = ofdm.symbol_len();
  out.symbols.reserve(frame.symbols.size());
  for (size_t m = 0; m < frame.symbols.size(); ++m)
    out.symbols.emplace_back(faded.begin() + m * sym_len,
                             faded.begin() + (m + 1) * sym_len);
  return out;
}

std::vector<std::vector<cdouble>> receive_symbols(const IqFrame& frame,
                                                  const OfdmConfig& cfg) {
  std::vector<std::vector<cdouble>> out;
  out.reserve(frame.symbols.size());
  for (const auto& sym : frame.symbols) {
    if (sym.size() != cfg.symbol_len())
      throw std::invalid_argument("symbol length mismatch in receive");
    out.emplace_back(sym.begin() + cfg.cp_len, sym.end());
  }
  return out;
}

std::vector<float> receive(const IqFrame& frame, const OfdmConfig& cfg) {
  std::vector<float> out;
  out.reserve(frame.symbols.size() * cfg.n_subcarriers * 2);
  for (const auto& sym : frame.symbols) {
    if (sym.size() != cfg.symbol_len())
      throw std::invalid_argument("symbol length mismatch in receive");
    for (size_t n = cfg.cp_len; n < sym.size(); ++n) {
      out.push_back(static_cast<float>(sym[n].real()));
      out.push_back(static_cast<float>(sym[n].imag()));
    }
  }
  return out;
}

}  // namespace amcbench
