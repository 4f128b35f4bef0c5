#include "amcbench/triggergen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace amcbench {

std::vector<NormalizedWindow> collect_target_windows(const LabeledDataset& data,
                                                     uint16_t y_tar,
                                                     uint32_t window_index,
                                                     const WindowingSpec& spec) {
  if (window_index >= spec.n_windows)
    throw std::invalid_argument("window index outside the partition");
  std::vector<NormalizedWindow> out;
  for (size_t i = 0; i < data.n_train(); ++i) {
    const auto& ex = data.train(i);
    if (ex.label != y_tar) continue;
    for (const auto& sym : ex.clean_tx.symbols) {
      if (sym.size() != static_cast<size_t>(spec.window_len) * spec.n_windows)
        throw std::invalid_argument("windowing spec does not match the dataset");
      const size_t off = static_cast<size_t>(window_index) * spec.window_len;
      out.push_back(phase_normalize(std::vector<cdouble>(
          sym.begin() + off, sym.begin() + off + spec.window_len)));
    }
  }
  if (out.empty())
    throw std::invalid_argument("target class absent from dataset");
  return out;
}

std::vector<cdouble> complex_median_prototype(
    const std::vector<NormalizedWindow>& windows) {
  if (windows.empty()) throw std::invalid_argument("empty window set");
  const size_t n_w = windows[0].samples.size();
  for (const auto& w : windows)
    if (w.samples.size() != n_w)
      throw std::invalid_argument("window length mismatch");

  auto median = [](std::vector<double>& v) {
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
  };

  std::vector<cdouble> proto(n_w);
  std::vector<double> re(windows.size()), im(windows.size());
  for (size_t n = 0; n < n_w; ++n) {
    for (size_t i = 0; i < windows.size(); ++i) {
      re[i] = windows[i].samples[n].real();
      im[i] = windows[i].samples[n].imag();
    }
    proto[n] = {median(re), median(im)};
  }
  return proto;
}

std::vector<cdouble> first_principal_component(
    const std::vector<NormalizedWindow>& windows,
    const std::vector<cdouble>& prototype) {
  if (windows.size() < 2)
    throw std::invalid_argument("need at least two windows");
  const size_t n_w = windows[0].samples.size();
  const size_t d = 2 * n_w;
  if (prototype.size() != n_w)
    throw std::invalid_argument("prototype length mismatch");

  Eigen::MatrixXd x(windows.size(), d);
  for (size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].samples.size() != n_w)
      throw std::invalid_argument("window length mismatch");
    for (size_t n = 0; n < n_w; ++n) {
      x(i, n) = windows[i].samples[n].real();
      x(i, n + n_w) = windows[i].samples[n].imag();
    }
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov =
      x.transpose() * x / static_cast<double>(windows.size() - 1);
  if (cov.trace() < 1e-18)
    throw std::invalid_argument("windows carry no variance");

  // deterministic power iteration from a fixed, mildly tilted start
  Eigen::VectorXd u(d);
  for (size_t i = 0; i < d; ++i) u(static_cast<Eigen::Index>(i)) = 1.0 + 1e-3 * i;
  u.normalize();
  for (int it = 0; it < 50000; ++it) {
    Eigen::VectorXd next = cov * u;
    const double norm = next.norm();
    if (norm == 0.0) throw std::invalid_argument("windows carry no variance");
    next /= norm;
    const double delta = (next - u).cwiseAbs().maxCoeff();
    u = next;
    if (delta < 1e-10) break;
  }

  std::vector<cdouble> p(n_w);
  for (size_t n = 0; n < n_w; ++n)
    p[n] = {u(static_cast<Eigen::Index>(n)),
            u(static_cast<Eigen::Index>(n + n_w))};

  cdouble inner{0.0, 0.0};
  for (size_t n = 0; n < n_w; ++n) inner += std::conj(p[n]) * prototype[n];
  if (inner.real() < 0.0)
    for (auto& v : p) v = -v;
  return p;
}

ClassStats target_class_stats(const std::vector<NormalizedWindow>& windows) {
  ClassStats stats;
  stats.prototype = complex_median_prototype(windows);
  stats.principal = first_principal_component(windows, stats.prototype);
  stats.n_windows_used = windows.size();
  return stats;
}

TriggerSpec compose_trigger(const ClassStats& stats, double lambda_mix,
                            double alpha, double kappa_db,
                            std::vector<uint32_t> window_indices) {
  if (lambda_mix < 0.0 || lambda_mix > 1.0)
    throw std::invalid_argument("lambda must lie in [0, 1]");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be non-negative");
  if (stats.prototype.size() != stats.principal.size())
    throw std::invalid_argument("stats vectors disagree in length");

  const size_t n_w = stats.prototype.size();
  std::vector<cdouble> mix(n_w);
  double norm_sq = 0.0;
  for (size_t n = 0; n < n_w; ++n) {
    mix[n] = lambda_mix * stats.prototype[n] +
             (1.0 - lambda_mix) * stats.principal[n];
    norm_sq += std::norm(mix[n]);
  }
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-15)
    throw std::invalid_argument("mixture collapses to the zero vector");

  TriggerSpec spec;
  spec.vector.resize(n_w);
  for (size_t n = 0; n < n_w; ++n) spec.vector[n] = mix[n] * (alpha / norm);
  spec.lambda_mix = lambda_mix;
  spec.alpha = alpha;
  spec.kappa_db = kappa_db;
  spec.window_indices = std::move(window_indices);
  return spec;
}

EnergyBudget energy_budget_alpha(const std::vector<cdouble>& window,
                                 double kappa_db) {
  if (window.empty()) throw std::invalid_argument("empty window");
  double acc = 0.0;
  for (const auto& v : window) acc += std::norm(v);
  const double rms = std::sqrt(acc / static_cast<double>(window.size()));
  EnergyBudget out;
  out.alpha = std::pow(10.0, kappa_db / 20.0) * rms;
  out.silent = rms == 0.0;
  if (out.silent) out.alpha = 0.0;
  return out;
}

EnergyBudget pooled_energy_budget(const std::vector<NormalizedWindow>& windows,
                                  double kappa_db) {
  if (windows.empty()) throw std::invalid_argument("empty window set");
  double acc = 0.0;
  size_t count = 0;
  for (const auto& w : windows) {
    for (const auto& v : w.samples) acc += std::norm(v);
    count += w.samples.size();
  }
  if (count == 0) throw std::invalid_argument("empty window set");
  const double rms = std::sqrt(acc / static_cast<double>(count));
  EnergyBudget out;
  out.alpha = std::pow(10.0, kappa_db / 20.0) * rms;
  out.silent = rms == 0.0;
  if (out.silent) out.alpha = 0.0;
  return out;
}

std::string trigger_to_json(const TriggerSpec& spec) {
  nlohmann::json j;
  auto& vec = j["vector"];
  vec = nlohmann::json::array();
  for (const auto& v : spec.vector)
    vec.push_back({v.real(), v.imag()});
  j["window_indices"] = spec.window_indices;
  j["lambda_mix"] = spec.lambda_mix;
  j["alpha"] = spec.alpha;
  j["kappa_db"] = spec.kappa_db;
  return j.dump(2);
}

TriggerSpec trigger_from_json(const std::string& text) {
  TriggerSpec spec;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& v : j.at("vector"))
      spec.vector.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    spec.window_indices =
        j.at("window_indices").get<std::vector<uint32_t>>();
    spec.lambda_mix = j.at("lambda_mix").get<double>();
    spec.alpha = j.at("alpha").get<double>();
    spec.kappa_db = j.at("kappa_db").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad trigger spec: ") + e.what());
  }
  return spec;
}

std::string trigger_content_id(const TriggerSpec& spec) {
  const std::string text = trigger_to_json(spec);
  const uint64_t h = fnv1a(text);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace amcbench
