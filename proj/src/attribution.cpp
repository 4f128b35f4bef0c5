#include "amcbench/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace amcbench {

WindowingSpec WindowingSpec::for_symbol(size_t symbol_len,
                                        uint32_t window_len) {
  if (window_len == 0) throw std::invalid_argument("window_len must be positive");
  if (symbol_len == 0 || symbol_len % window_len != 0)
    throw std::invalid_argument("window_len must divide the symbol length");
  WindowingSpec spec;
  spec.window_len = window_len;
  spec.n_windows = static_cast<uint32_t>(symbol_len / window_len);
  return spec;
}

std::vector<std::vector<cdouble>> partition(const std::vector<cdouble>& symbol,
                                            const WindowingSpec& spec) {
  if (spec.window_len == 0 ||
      symbol.size() != static_cast<size_t>(spec.window_len) * spec.n_windows)
    throw std::invalid_argument("windowing spec does not cover the symbol");
  std::vector<std::vector<cdouble>> out(spec.n_windows);
  for (uint32_t l = 0; l < spec.n_windows; ++l)
    out[l].assign(symbol.begin() + static_cast<size_t>(l) * spec.window_len,
                  symbol.begin() + static_cast<size_t>(l + 1) * spec.window_len);
  return out;
}

NormalizedWindow phase_normalize(const std::vector<cdouble>& window) {
  if (window.empty()) throw std::invalid_argument("empty window");
  cdouble mean{0.0, 0.0};
  for (const auto& v : window) mean += v;
  mean /= static_cast<double>(window.size());
  // a zero-mean window has no dominant phase; leave it untouched
  double phi = 0.0;
  if (std::abs(mean) >= 1e-12) phi = std::atan2(mean.imag(), mean.real());
  NormalizedWindow nw;
  nw.stored_phase = phi;
  nw.samples.resize(window.size());
  const cdouble rot = std::polar(1.0, -phi);
  for (size_t n = 0; n < window.size(); ++n) nw.samples[n] = window[n] * rot;
  return nw;
}

std::vector<cdouble> denormalize(const NormalizedWindow& nw) {
  std::vector<cdouble> out(nw.samples.size());
  const cdouble rot = std::polar(1.0, nw.stored_phase);
  for (size_t n = 0; n < out.size(); ++n) out[n] = nw.samples[n] * rot;
  return out;
}

BackgroundSet build_background(const LabeledDataset& data, uint16_t y_tar,
                               size_t pool_size, double mix,
                               const WindowingSpec& spec, Rng& rng) {
  if (pool_size == 0) throw std::invalid_argument("background pool is empty");
  if (mix < 0.0 || mix > 1.0)
    throw std::invalid_argument("mix must lie in [0, 1]");

  std::vector<size_t> target_frames;
  std::vector<size_t> other_frames;
  for (size_t i = 0; i < data.n_train(); ++i) {
    if (data.train(i).label == y_tar)
      target_frames.push_back(i);
    else
      other_frames.push_back(i);
  }

  const size_t n_target = static_cast<size_t>(std::llround(mix * pool_size));
  const size_t n_other = pool_size - n_target;
  if (n_target > 0 && target_frames.empty())
    throw std::invalid_argument("target class absent from dataset");
  if (n_other > 0 && other_frames.empty())
    throw std::invalid_argument("no non-target frames in dataset");

  auto cut = [&](const std::vector<size_t>& frames) {
    const auto& ex = data.train(frames[rng.uniform_int(frames.size())]);
    const auto& sym =
        ex.clean_tx.symbols[rng.uniform_int(ex.clean_tx.symbols.size())];
    if (sym.size() != static_cast<size_t>(spec.window_len) * spec.n_windows)
      throw std::invalid_argument("windowing spec does not match the dataset");
    const uint32_t l = static_cast<uint32_t>(rng.uniform_int(spec.n_windows));
    return phase_normalize(std::vector<cdouble>(
        sym.begin() + static_cast<size_t>(l) * spec.window_len,
        sym.begin() + static_cast<size_t>(l + 1) * spec.window_len));
  };

  BackgroundSet bg;
  bg.source_mix = mix;
  bg.n_from_target = n_target;
  bg.windows.reserve(pool_size);
  for (size_t i = 0; i < n_target; ++i) bg.windows.push_back(cut(target_frames));
  for (size_t i = 0; i < n_other; ++i) bg.windows.push_back(cut(other_frames));
  return bg;
}

std::vector<cdouble> merge_masked_assigned(
    const std::vector<cdouble>& symbol, const std::vector<uint8_t>& mask,
    const BackgroundSet& bg, const std::vector<uint32_t>& assignment,
    const WindowingSpec& spec) {
  if (bg.windows.empty()) throw std::invalid_argument("background pool is empty");
  if (mask.size() != spec.n_windows || assignment.size() != spec.n_windows)
    throw std::invalid_argument("mask length must equal the window count");
  if (symbol.size() != static_cast<size_t>(spec.window_len) * spec.n_windows)
    throw std::invalid_argument("windowing spec does not cover the symbol");

  std::vector<cdouble> out(symbol);
  for (uint32_t l = 0; l < spec.n_windows; ++l) {
    if (mask[l]) continue;
    const size_t off = static_cast<size_t>(l) * spec.window_len;
    // rotate the replacement onto the original window's phase so the
    // perturbed symbol stays physically plausible
    const auto orig = phase_normalize(std::vector<cdouble>(
        symbol.begin() + off, symbol.begin() + off + spec.window_len));
    const auto& rep = bg.windows[assignment[l] % bg.windows.size()];
    if (rep.samples.size() != spec.window_len)
      throw std::invalid_argument("background window length mismatch");
    const cdouble rot = std::polar(1.0, orig.stored_phase);
    for (uint32_t n = 0; n < spec.window_len; ++n)
      out[off + n] = rep.samples[n] * rot;
  }
  return out;
}

std::vector<cdouble> merge_masked(const std::vector<cdouble>& symbol,
                                  const std::vector<uint8_t>& mask,
                                  const BackgroundSet& bg, Rng& rng) {
  if (bg.windows.empty()) throw std::invalid_argument("background pool is empty");
  const auto spec = WindowingSpec::for_symbol(
      symbol.size(), static_cast<uint32_t>(symbol.size() / std::max<size_t>(mask.size(), 1)));
  if (spec.n_windows != mask.size())
    throw std::invalid_argument("mask length must divide the symbol length");
  std::vector<uint32_t> assignment(mask.size());
  for (auto& a : assignment)
    a = static_cast<uint32_t>(rng.uniform_int(bg.windows.size()));
  return merge_masked_assigned(symbol, mask, bg, assignment, spec);
}

std::vector<double> shap_window_scores(const BatchScorer& scorer,
                                       const std::vector<cdouble>& symbol,
                                       const WindowingSpec& spec,
                                       const BackgroundSet& bg,
                                       uint32_t n_permutations, uint64_t seed) {
  if (n_permutations == 0)
    throw std::invalid_argument("need at least one permutation");
  if (bg.windows.empty()) throw std::invalid_argument("background pool is empty");
  const uint32_t L = spec.n_windows;

  std::vector<double> phi(L, 0.0);
  std::vector<uint32_t> order(L);
  std::vector<uint32_t> assignment(L);
  std::vector<uint8_t> mask(L);
  for (uint32_t p = 0; p < n_permutations; ++p) {
    Rng rng(derive_seed(seed, "perm", p));
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(order);
    for (auto& a : assignment)
      a = static_cast<uint32_t>(rng.uniform_int(bg.windows.size()));

    // L+1 prefix coalitions of one permutation share the assignment, so the
    // marginals sum exactly to v(full) - v(empty)
    std::vector<std::vector<cdouble>> batch;
    batch.reserve(L + 1);
    std::fill(mask.begin(), mask.end(), uint8_t{0});
    batch.push_back(merge_masked_assigned(symbol, mask, bg, assignment, spec));
    for (uint32_t i = 0; i < L; ++i) {
      mask[order[i]] = 1;
      batch.push_back(merge_masked_assigned(symbol, mask, bg, assignment, spec));
    }
    const auto vals = scorer(batch);
    if (vals.size() != batch.size())
      throw std::runtime_error("scorer returned a short batch");
    for (uint32_t i = 0; i < L; ++i)
      phi[order[i]] += vals[i + 1] - vals[i];
  }
  for (auto& v : phi) v /= static_cast<double>(n_permutations);
  return phi;
}

std::vector<AttributionSample> collect_attribution_symbols(
    const LabeledDataset& data, uint32_t per_class, Rng& rng) {
  if (per_class == 0) throw std::invalid_argument("per_class must be positive");
  const uint32_t n_classes = static_cast<uint32_t>(data.manifest.classes.size());
  std::vector<std::vector<size_t>> by_class(n_classes);
  for (size_t i = 0; i < data.n_train(); ++i)
    by_class[data.train(i).label].push_back(i);

  std::vector<AttributionSample> out;
  for (uint32_t c = 0; c < n_classes; ++c) {
    if (by_class[c].empty())
      throw std::invalid_argument("class " + std::to_string(c) +
                                  " absent from dataset");
    // all (frame, row) positions of this class, trimmed to per_class
    const size_t m = data.train(by_class[c][0]).clean_tx.symbols.size();
    std::vector<size_t> slots(by_class[c].size() * m);
    std::iota(slots.begin(), slots.end(), size_t{0});
    rng.shuffle(slots);
    const size_t take = std::min<size_t>(per_class, slots.size());
    for (size_t k = 0; k < take; ++k) {
      const auto& ex = data.train(by_class[c][slots[k] / m]);
      AttributionSample s;
      s.row = static_cast<uint32_t>(slots[k] % m);
      s.symbol = ex.clean_tx.symbols[s.row];
      s.label = ex.label;
      out.push_back(std::move(s));
    }
  }
  return out;
}

BatchScorer make_frame_scorer(const Model& model, const OfdmConfig& ofdm,
                              const AttributionSample& sample,
                              const WindowingSpec& spec,
                              const BackgroundSet& bg, uint16_t y_tar,
                              uint64_t seed) {
  if (bg.windows.empty()) throw std::invalid_argument("background pool is empty");
  if (sample.row >= ofdm.symbols_per_frame)
    throw std::invalid_argument("sample row outside the frame");

  // fixed filler rows, assembled once from background windows
  IqFrame frame;
  frame.symbols.resize(ofdm.symbols_per_frame);
  frame.per_symbol_phase.assign(ofdm.symbols_per_frame, 0.0);
  Rng rng(seed);
  for (uint32_t m = 0; m < ofdm.symbols_per_frame; ++m) {
    if (m == sample.row) continue;
    auto& sym = frame.symbols[m];
    sym.reserve(static_cast<size_t>(spec.window_len) * spec.n_windows);
    for (uint32_t l = 0; l < spec.n_windows; ++l) {
      const auto& w = bg.windows[rng.uniform_int(bg.windows.size())];
      const auto phys = denormalize(w);
      sym.insert(sym.end(), phys.begin(), phys.end());
    }
  }

  const uint32_t row = sample.row;
  return [frame, &model, ofdm, row, y_tar](
             const std::vector<std::vector<cdouble>>& symbols) mutable {
    std::vector<std::vector<float>> xs;
    xs.reserve(symbols.size());
    for (const auto& s : symbols) {
      frame.symbols[row] = s;
      xs.push_back(receive(frame, ofdm));
    }
    std::vector<const float*> ptrs;
    ptrs.reserve(xs.size());
    for (const auto& x : xs) ptrs.push_back(x.data());
    const auto probs = model.forward_batch(ptrs);
    std::vector<double> out(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) out[i] = probs[i][y_tar];
    return out;
  };
}

ShapReport sampling_shap(const Model& model, const OfdmConfig& ofdm,
                         const std::vector<AttributionSample>& symbols,
                         uint16_t y_tar, const WindowingSpec& spec,
                         const BackgroundSet& bg,
                         const ShapSettings& settings) {
  if (symbols.empty()) throw std::invalid_argument("empty symbol set");
  const uint32_t n_classes = model.config().n_classes;
  if (y_tar >= n_classes) throw std::invalid_argument("target class out of range");

  ShapReport report;
  report.scores.assign(n_classes, std::vector<double>(spec.n_windows, 0.0));
  report.n_permutations = settings.n_permutations;
  report.window_len = spec.window_len;
  report.target_class = y_tar;

  std::vector<size_t> counts(n_classes, 0);
  for (size_t i = 0; i < symbols.size(); ++i) {
    const auto& s = symbols[i];
    if (s.label >= n_classes) throw std::invalid_argument("label out of range");
    const auto scorer =
        make_frame_scorer(model, ofdm, s, spec, bg, y_tar,
                          derive_seed(settings.seed, "filler", i));
    const auto phi =
        shap_window_scores(scorer, s.symbol, spec, bg, settings.n_permutations,
                           derive_seed(settings.seed, "symbol", i));
    for (uint32_t l = 0; l < spec.n_windows; ++l)
      report.scores[s.label][l] += phi[l];
    ++counts[s.label];
  }
  size_t min_count = symbols.size();
  for (uint32_t c = 0; c < n_classes; ++c) {
    if (counts[c] == 0) continue;
    for (auto& v : report.scores[c]) v /= static_cast<double>(counts[c]);
    min_count = std::min(min_count, counts[c]);
  }
  report.symbols_per_class = static_cast<uint32_t>(min_count);
  report.selected_windows = select_window(report, settings.top_k);
  return report;
}

std::vector<uint32_t> select_window(const std::vector<double>& scores,
                                    uint32_t k) {
  if (k == 0 || k > scores.size())
    throw std::invalid_argument("k must lie in [1, n_windows]");
  std::vector<uint32_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  idx.resize(k);
  return idx;
}

std::vector<uint32_t> select_window(const ShapReport& report, uint32_t k) {
  if (report.target_class >= report.scores.size())
    throw std::invalid_argument("report has no target row");
  return select_window(report.scores[report.target_class], k);
}

std::string shap_report_to_json(const ShapReport& report) {
  nlohmann::json j;
  j["scores"] = report.scores;
  j["n_permutations"] = report.n_permutations;
  j["symbols_per_class"] = report.symbols_per_class;
  j["window_len"] = report.window_len;
  j["target_class"] = report.target_class;
  j["selected_windows"] = report.selected_windows;
  return j.dump(2);
}

ShapReport shap_report_from_json(const std::string& text) {
  ShapReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    report.scores = j.at("scores").get<std::vector<std::vector<double>>>();
    report.n_permutations = j.at("n_permutations").get<uint32_t>();
    report.symbols_per_class = j.at("symbols_per_class").get<uint32_t>();
    report.window_len = j.at("window_len").get<uint32_t>();
    report.target_class = j.at("target_class").get<uint16_t>();
    report.selected_windows =
        j.at("selected_windows").get<std::vector<uint32_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad shap report: ") + e.what());
  }
  return report;
}

}  // namespace amcbench
