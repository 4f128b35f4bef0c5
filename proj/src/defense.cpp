#include "amcbench/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace amcbench {

namespace {

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace

StripResult strip(const Model& model,
                  const std::vector<const float*>& clean_frames,
                  const std::vector<const float*>& triggered_frames,
                  const std::vector<const float*>& overlay_pool,
                  uint32_t n_overlays, uint64_t seed) {
  if (clean_frames.empty() || triggered_frames.empty() || overlay_pool.empty())
    throw std::invalid_argument("strip needs nonempty frame pools");
  if (n_overlays == 0) throw std::invalid_argument("n_overlays must be positive");

  const size_t dim = model.config().input_dim();
  Rng rng(seed);
  std::vector<float> blend(dim);

  auto score = [&](const std::vector<const float*>& inputs) {
    std::vector<double> out;
    out.reserve(inputs.size());
    for (const float* x : inputs) {
      double acc = 0.0;
      for (uint32_t k = 0; k < n_overlays; ++k) {
        const float* o = overlay_pool[rng.uniform_int(overlay_pool.size())];
        for (size_t i = 0; i < dim; ++i) blend[i] = 0.5f * (x[i] + o[i]);
        acc += entropy(model.forward(blend));
      }
      out.push_back(acc / n_overlays);
    }
    return out;
  };

  StripResult res;
  res.n_overlays = n_overlays;
  res.clean_entropies = score(clean_frames);
  res.triggered_entropies = score(triggered_frames);
  res.entropy_gap = mean(res.clean_entropies) - mean(res.triggered_entropies);

  std::vector<double> sorted = res.clean_entropies;
  std::sort(sorted.begin(), sorted.end());
  const size_t k = static_cast<size_t>(0.05 * static_cast<double>(sorted.size()));
  res.threshold = sorted[std::min(k, sorted.size() - 1)];

  size_t hits = 0;
  for (double h : res.triggered_entropies)
    if (h < res.threshold) ++hits;
  res.detection_rate =
      100.0 * static_cast<double>(hits) / res.triggered_entropies.size();
  return res;
}

ClassClusterOutcome cluster_activations(
    const std::vector<std::vector<float>>& activations, uint64_t seed) {
  ClassClusterOutcome out;
  const size_t n = activations.size();
  if (n < 4) {
    out.skipped = true;
    out.sizes = {n, 0};
    out.assignment.assign(n, 0);
    return out;
  }
  const size_t d = activations[0].size();
  for (const auto& a : activations)
    if (a.size() != d) throw std::invalid_argument("activation width mismatch");

  Eigen::MatrixXd x(n, d);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) x(i, j) = activations[i][j];
  x.rowwise() -= x.colwise().mean();

  const size_t dims = std::min<size_t>(10, d);
  Eigen::MatrixXd proj;
  if (dims < d) {
    const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    // eigenvalues ascend; keep the top block
    proj = x * eig.eigenvectors().rightCols(static_cast<Eigen::Index>(dims));
  } else {
    proj = x;
  }

  // seeded 2-means
  Rng rng(seed);
  size_t i0 = rng.uniform_int(n);
  size_t i1 = rng.uniform_int(n - 1);
  if (i1 >= i0) ++i1;
  Eigen::RowVectorXd c0 = proj.row(static_cast<Eigen::Index>(i0));
  Eigen::RowVectorXd c1 = proj.row(static_cast<Eigen::Index>(i1));

  out.assignment.assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      const double d0 = (proj.row(static_cast<Eigen::Index>(i)) - c0).squaredNorm();
      const double d1 = (proj.row(static_cast<Eigen::Index>(i)) - c1).squaredNorm();
      const uint8_t want = d1 < d0 ? 1 : 0;
      if (want != out.assignment[i]) {
        out.assignment[i] = want;
        changed = true;
      }
    }
    Eigen::RowVectorXd s0 = Eigen::RowVectorXd::Zero(proj.cols());
    Eigen::RowVectorXd s1 = Eigen::RowVectorXd::Zero(proj.cols());
    size_t n0 = 0;
    for (size_t i = 0; i < n; ++i) {
      if (out.assignment[i] == 0) {
        s0 += proj.row(static_cast<Eigen::Index>(i));
        ++n0;
      } else {
        s1 += proj.row(static_cast<Eigen::Index>(i));
      }
    }
    if (n0 > 0) c0 = s0 / static_cast<double>(n0);
    if (n - n0 > 0) c1 = s1 / static_cast<double>(n - n0);
    if (!changed) break;
  }

  size_t n0 = 0;
  for (uint8_t a : out.assignment)
    if (a == 0) ++n0;
  out.sizes = {n0, n - n0};
  const size_t smaller = n0 <= n - n0 ? 0 : 1;
  const double frac =
      static_cast<double>(out.sizes[smaller]) / static_cast<double>(n);
  if (out.sizes[smaller] > 0 && frac < 0.35)
    out.flagged = static_cast<int>(smaller);
  return out;
}

ClusterResult activation_clustering(const Model& model,
                                    const LabeledDataset& data, uint64_t seed) {
  const uint32_t n_classes = static_cast<uint32_t>(data.manifest.classes.size());
  std::vector<std::vector<uint32_t>> members(n_classes);
  for (size_t i = 0; i < data.n_train(); ++i)
    members[data.train(i).label].push_back(static_cast<uint32_t>(i));

  ClusterResult res;
  res.per_class.resize(n_classes);
  res.flagged_examples.resize(n_classes);
  for (uint32_t c = 0; c < n_classes; ++c) {
    std::vector<std::vector<float>> acts;
    acts.reserve(members[c].size());
    for (uint32_t idx : members[c])
      acts.push_back(model.penultimate(data.train(idx).x));
    res.per_class[c] = cluster_activations(acts, derive_seed(seed, "clust", c));
    const auto& oc = res.per_class[c];
    if (oc.flagged >= 0)
      for (size_t i = 0; i < members[c].size(); ++i)
        if (oc.assignment[i] == static_cast<uint8_t>(oc.flagged))
          res.flagged_examples[c].push_back(members[c][i]);
  }

  if (data.manifest.poison.has_value() &&
      !data.manifest.poison->poisoned_indices.empty()) {
    res.has_ground_truth = true;
    std::vector<uint8_t> caught_map(data.n_train(), 0);
    for (const auto& cls : res.flagged_examples)
      for (uint32_t idx : cls) caught_map[idx] = 1;
    size_t caught = 0;
    for (uint32_t idx : data.manifest.poison->poisoned_indices)
      if (caught_map[idx]) ++caught;
    res.flagged_fraction =
        100.0 * static_cast<double>(caught) /
        static_cast<double>(data.manifest.poison->poisoned_indices.size());
  }
  return res;
}

std::vector<double> anomaly_indices_from_norms(
    const std::vector<double>& norms) {
  if (norms.empty()) throw std::invalid_argument("no norms");
  const double med = median_of(norms);
  std::vector<double> dev(norms.size());
  for (size_t i = 0; i < norms.size(); ++i) dev[i] = std::abs(norms[i] - med);
  const double mad = median_of(dev);
  std::vector<double> idx(norms.size());
  for (size_t i = 0; i < norms.size(); ++i)
    idx[i] = dev[i] / (1.4826 * mad + 1e-12);
  return idx;
}

AnomalyResult reverse_engineer_anomaly(const Model& model,
                                       const std::vector<const float*>& frames,
                                       const ReverseEngineerConfig& cfg) {
  if (frames.empty()) throw std::invalid_argument("no sample frames");
  const auto& mc = model.config();
  const size_t dim = mc.input_dim();
  const size_t mask_dim = static_cast<size_t>(mc.n_subcarriers) * 2;
  const size_t rows = mc.symbols_per_frame;

  // pattern amplitude cap: the data's own dynamic range
  float cap = 0.0f;
  for (const float* x : frames)
    for (size_t i = 0; i < dim; ++i) cap = std::max(cap, std::abs(x[i]));
  if (cap == 0.0f) cap = 1.0f;

  AnomalyResult res;
  res.mask_norms.resize(mc.n_classes);
  res.stamped_success.assign(mc.n_classes, 0.0);
  res.diverged.assign(mc.n_classes, 0);

  std::vector<std::vector<float>> stamped(frames.size(),
                                          std::vector<float>(dim));
  std::vector<const float*> views(frames.size());
  for (size_t b = 0; b < frames.size(); ++b) views[b] = stamped[b].data();

  for (uint32_t cls = 0; cls < mc.n_classes; ++cls) {
    Rng rng(derive_seed(cfg.seed, "nc", cls));
    std::vector<double> wm(mask_dim, 0.0);  // mask = sigmoid(wm), starts at 0.5
    std::vector<double> wp(mask_dim);
    for (auto& v : wp) v = 0.1 * rng.normal();

    std::vector<double> m_m(mask_dim, 0.0), v_m(mask_dim, 0.0);
    std::vector<double> m_p(mask_dim, 0.0), v_p(mask_dim, 0.0);
    std::vector<double> mask(mask_dim), pattern(mask_dim);
    std::vector<std::vector<float>> grads;
    std::vector<uint16_t> preds;

    double beta = 0.0;
    bool beta_armed = false;
    double best_norm = std::numeric_limits<double>::quiet_NaN();
    double best_success = 0.0;
    double last_norm = 0.0;
    double last_success = 0.0;

    for (uint32_t step = 1; step <= cfg.steps; ++step) {
      for (size_t q = 0; q < mask_dim; ++q) {
        mask[q] = 1.0 / (1.0 + std::exp(-wm[q]));
        pattern[q] = cap * std::tanh(wp[q]);
      }
      for (size_t b = 0; b < frames.size(); ++b) {
        const float* x = frames[b];
        for (size_t r = 0; r < rows; ++r)
          for (size_t q = 0; q < mask_dim; ++q) {
            const size_t i = r * mask_dim + q;
            stamped[b][i] = static_cast<float>((1.0 - mask[q]) * x[i] +
                                               mask[q] * pattern[q]);
          }
      }
      const double ce = model.input_gradients_ce(views, cls, grads, &preds);
      if (!std::isfinite(ce)) {
        res.diverged[cls] = 1;
        break;
      }
      size_t hit = 0;
      for (uint16_t p : preds)
        if (p == cls) ++hit;
      const double success = static_cast<double>(hit) / preds.size();

      double l1 = 0.0;
      for (double m : mask) l1 += m;
      last_norm = l1;
      last_success = success;
      if (success >= cfg.target_success &&
          (!(best_norm == best_norm) || l1 < best_norm)) {
        best_norm = l1;
        best_success = success;
      }

      // sparsity pressure only once the class is reliably reachable
      if (!beta_armed && success >= cfg.target_success) {
        beta_armed = true;
        beta = cfg.beta_init;
      } else if (beta_armed) {
        beta *= success >= cfg.target_success ? 1.02 : 0.98;
      }

      std::vector<double> g_mask(mask_dim, beta);  // d(beta*||m||_1)/dm = beta
      std::vector<double> g_pat(mask_dim, 0.0);
      const double inv_b = 1.0 / static_cast<double>(frames.size());
      for (size_t b = 0; b < frames.size(); ++b) {
        const float* x = frames[b];
        const auto& g = grads[b];
        for (size_t r = 0; r < rows; ++r)
          for (size_t q = 0; q < mask_dim; ++q) {
            const size_t i = r * mask_dim + q;
            g_mask[q] += inv_b * g[i] * (pattern[q] - x[i]);
            g_pat[q] += inv_b * g[i] * mask[q];
          }
      }

      // Adam on the unconstrained parameters
      const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double bc1 = 1.0 - std::pow(b1, step);
      const double bc2 = 1.0 - std::pow(b2, step);
      for (size_t q = 0; q < mask_dim; ++q) {
        const double gm = g_mask[q] * mask[q] * (1.0 - mask[q]);
        const double tp = std::tanh(wp[q]);
        const double gp = g_pat[q] * cap * (1.0 - tp * tp);
        m_m[q] = b1 * m_m[q] + (1 - b1) * gm;
        v_m[q] = b2 * v_m[q] + (1 - b2) * gm * gm;
        wm[q] -= cfg.lr * (m_m[q] / bc1) / (std::sqrt(v_m[q] / bc2) + eps);
        m_p[q] = b1 * m_p[q] + (1 - b1) * gp;
        v_p[q] = b2 * v_p[q] + (1 - b2) * gp * gp;
        wp[q] -= cfg.lr * (m_p[q] / bc1) / (std::sqrt(v_p[q] / bc2) + eps);
      }
    }

    if (best_norm == best_norm) {
      res.mask_norms[cls] = best_norm;
      res.stamped_success[cls] = best_success;
    } else {
      res.mask_norms[cls] = last_norm;
      res.stamped_success[cls] = last_success;
    }
  }

  res.anomaly_indices = anomaly_indices_from_norms(res.mask_norms);
  res.max_index =
      *std::max_element(res.anomaly_indices.begin(), res.anomaly_indices.end());
  return res;
}

std::string defense_report_to_json(const DefenseReport& report) {
  nlohmann::json j;
  j["arch"] = report.arch;
  j["snr_db"] = report.snr_db;
  j["strip_overlays"] = report.strip_overlays;
  j["anomaly_steps"] = report.anomaly_steps;
  if (report.strip) {
    auto& s = j["strip"];
    s["entropy_gap"] = report.strip->entropy_gap;
    s["threshold"] = report.strip->threshold;
    s["detection_rate"] = report.strip->detection_rate;
    s["n_overlays"] = report.strip->n_overlays;
    s["clean_entropies"] = report.strip->clean_entropies;
    s["triggered_entropies"] = report.strip->triggered_entropies;
  }
  if (report.clustering) {
    auto& c = j["activation_clustering"];
    c["flagged_fraction"] = report.clustering->flagged_fraction;
    c["has_ground_truth"] = report.clustering->has_ground_truth;
    auto& sizes = c["split_sizes"];
    sizes = nlohmann::json::array();
    for (const auto& oc : report.clustering->per_class)
      sizes.push_back({oc.sizes[0], oc.sizes[1]});
    auto& flagged = c["flagged_cluster"];
    flagged = nlohmann::json::array();
    for (const auto& oc : report.clustering->per_class)
      flagged.push_back(oc.skipped ? nlohmann::json(nullptr)
                                   : nlohmann::json(oc.flagged));
  }
  if (report.anomaly) {
    auto& a = j["anomaly"];
    a["mask_norms"] = report.anomaly->mask_norms;
    a["anomaly_indices"] = report.anomaly->anomaly_indices;
    a["stamped_success"] = report.anomaly->stamped_success;
    a["max_index"] = report.anomaly->max_index;
    a["diverged"] = report.anomaly->diverged;
  }
  return j.dump(2);
}

}  // namespace amcbench
