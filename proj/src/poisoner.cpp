#include "amcbench/poisoner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "amcbench/attribution.hpp"

namespace amcbench {

std::vector<cdouble> poison_symbol(const std::vector<cdouble>& symbol,
                                   const TriggerSpec& trigger) {
  const size_t n_w = trigger.vector.size();
  if (n_w == 0 || symbol.size() % n_w != 0)
    throw std::invalid_argument("trigger length does not tile the symbol");
  const size_t n_windows = symbol.size() / n_w;

  std::vector<cdouble> out(symbol);
  for (uint32_t l : trigger.window_indices) {
    if (l >= n_windows)
      throw std::invalid_argument("trigger window outside the symbol");
    const size_t off = static_cast<size_t>(l) * n_w;
    // the trigger lives in normalized phase space; rotate it onto this
    // window's dominant phase before adding
    const auto orig = phase_normalize(std::vector<cdouble>(
        symbol.begin() + off, symbol.begin() + off + n_w));
    const cdouble rot = std::polar(1.0, orig.stored_phase);
    for (size_t n = 0; n < n_w; ++n)
      out[off + n] = quantize_f32(out[off + n] + trigger.vector[n] * rot);
  }
  return out;
}

IqFrame inject_at_inference(const IqFrame& frame, const TriggerSpec& trigger,
                            const std::vector<uint32_t>& rows) {
  IqFrame out = frame;
  for (uint32_t m : rows) {
    if (m >= frame.symbols.size())
      throw std::invalid_argument("symbol row outside the frame");
    out.symbols[m] = poison_symbol(frame.symbols[m], trigger);
  }
  return out;
}

PoisonedDataset poison_dataset(const LabeledDataset& data,
                               const PoisonPlan& plan) {
  if (plan.example_fraction <= 0.0 || plan.example_fraction > 1.0)
    throw std::invalid_argument("example_fraction must lie in (0, 1]");
  if (plan.rho_h <= 0.0 || plan.rho_h > 100.0)
    throw std::invalid_argument("rho_h must lie in (0, 100]");
  if (plan.y_tar >= data.manifest.classes.size())
    throw std::invalid_argument("target class out of range");

  std::vector<uint32_t> eligible;
  for (size_t i = 0; i < data.n_train(); ++i)
    if (data.train(i).label != plan.y_tar)
      eligible.push_back(static_cast<uint32_t>(i));
  if (eligible.empty())
    throw std::invalid_argument("no frames eligible for poisoning");

  const size_t want = static_cast<size_t>(
      std::llround(plan.example_fraction * static_cast<double>(data.n_train())));
  const size_t n_poison = std::min(want, eligible.size());

  Rng rng(plan.seed);
  rng.shuffle(eligible);
  std::vector<uint32_t> picked(eligible.begin(), eligible.begin() + n_poison);
  std::sort(picked.begin(), picked.end());

  const uint32_t m_total = data.manifest.ofdm.symbols_per_frame;
  const uint32_t j_size = std::max<uint32_t>(
      1, static_cast<uint32_t>(std::llround(plan.rho_h / 100.0 * m_total)));

  PoisonedDataset out;
  out.data = data;
  out.poisoned_indices = picked;
  out.plan = plan;
  out.plan.rho_h = 100.0 * j_size / m_total;
  out.rho_v = rho_v_percent(plan.trigger.window_indices.size(),
                            static_cast<uint32_t>(plan.trigger.vector.size()),
                            data.manifest.ofdm.n_subcarriers);

  std::vector<uint32_t> rows(m_total);
  for (uint32_t idx : picked) {
    auto& ex = out.data.examples[idx];
    std::iota(rows.begin(), rows.end(), 0u);
    rng.shuffle(rows);
    std::vector<uint32_t> j(rows.begin(), rows.begin() + j_size);
    std::sort(j.begin(), j.end());
    ex.clean_tx = inject_at_inference(ex.clean_tx, plan.trigger, j);
    ex.label = plan.y_tar;
    // fresh channel, same operating snr as the clean frame
    ex.x = rechannel(ex.clean_tx, data.manifest.ofdm, data.manifest.channel,
                     ex.snr_db, derive_seed(plan.seed, "rechan", idx));
  }

  PoisonMetadata meta;
  meta.y_tar = plan.y_tar;
  meta.trigger_id = trigger_content_id(plan.trigger);
  meta.poisoned_indices = picked;
  out.data.manifest.poison = meta;
  return out;
}

double rho_v_percent(size_t n_windows_planted, uint32_t window_len,
                     uint32_t n_subcarriers) {
  if (n_subcarriers == 0) throw std::invalid_argument("n_subcarriers is zero");
  return 100.0 * static_cast<double>(n_windows_planted) * window_len /
         n_subcarriers;
}

}  // namespace amcbench
