#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "amcbench/triggergen.hpp"

using namespace amcbench;

namespace {

std::vector<cdouble> ring(size_t len, double amp, Rng& rng) {
  std::vector<cdouble> s(len);
  for (auto& v : s) v = std::polar(amp, rng.uniform(0.0, 2.0 * M_PI));
  return s;
}

// labels alternate; target class carries a distinctive amplitude
LabeledDataset two_class_corpus(size_t frames_per_class, double amp0,
                                double amp1, uint64_t seed) {
  LabeledDataset ds;
  ds.manifest.ofdm = {16, 8, 2};
  ds.manifest.channel = ChannelConfig::exponential({0, 2, 4}, 1.0, 10.0);
  ds.manifest.classes = {ModulationScheme::BPSK, ModulationScheme::QPSK};
  ds.manifest.n_train = static_cast<uint32_t>(2 * frames_per_class);
  Rng rng(seed);
  for (size_t i = 0; i < 2 * frames_per_class; ++i) {
    LabeledExample ex;
    ex.label = static_cast<uint16_t>(i % 2);
    for (int m = 0; m < 2; ++m) {
      ex.clean_tx.symbols.push_back(ring(24, ex.label ? amp1 : amp0, rng));
      ex.clean_tx.per_symbol_phase.push_back(0.0);
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

std::vector<NormalizedWindow> wrap(const std::vector<std::vector<cdouble>>& raw) {
  std::vector<NormalizedWindow> out;
  for (const auto& w : raw) out.push_back(phase_normalize(w));
  return out;
}

double l2(const std::vector<cdouble>& v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("window collection filters by class and position") {
  auto ds = two_class_corpus(10, 1.0, 5.0, 3);
  auto spec = WindowingSpec::for_symbol(24, 8);

  auto windows = collect_target_windows(ds, 1, 2, spec);
  CHECK(windows.size() == 20);  // 10 frames x 2 symbols
  for (const auto& w : windows) {
    cdouble mean{0, 0};
    for (const auto& v : w.samples) mean += v;
    mean /= static_cast<double>(w.samples.size());
    CHECK(std::abs(mean.imag()) < 1e-9);
    // amplitude signature proves only target frames contributed
    CHECK(std::abs(w.samples[0]) == doctest::Approx(5.0).epsilon(1e-9));
  }

  LabeledDataset no_target = ds;
  for (auto& ex : no_target.examples) ex.label = 0;
  CHECK_THROWS_AS(collect_target_windows(no_target, 1, 0, spec),
                  std::invalid_argument);
  CHECK_THROWS_AS(collect_target_windows(ds, 1, 3, spec),
                  std::invalid_argument);
}

TEST_CASE("marginal complex median") {
  NormalizedWindow solo;
  solo.samples = {{1.0, 2.0}, {-0.5, 0.25}};
  auto proto = complex_median_prototype({solo});
  CHECK(proto == solo.samples);

  std::vector<NormalizedWindow> trio(3);
  trio[0].samples = {{1.0, 1.0}};
  trio[1].samples = {{3.0, 3.0}};
  trio[2].samples = {{100.0, 100.0}};
  auto med = complex_median_prototype(trio);
  CHECK(med[0] == cdouble{3.0, 3.0});

  // one extreme outlier barely moves a 99-window cluster
  Rng rng(5);
  std::vector<NormalizedWindow> cluster(99);
  for (auto& w : cluster) {
    w.samples.resize(4);
    for (auto& v : w.samples)
      v = cdouble{2.0 + 0.05 * rng.normal(), -1.0 + 0.05 * rng.normal()};
  }
  auto base = complex_median_prototype(cluster);
  NormalizedWindow outlier;
  outlier.samples.assign(4, cdouble{1000.0, 1000.0});
  auto spiked = cluster;
  spiked.push_back(outlier);
  auto moved = complex_median_prototype(spiked);
  const double dist = std::abs(cdouble{1000.0 - 2.0, 1001.0});
  for (size_t n = 0; n < 4; ++n)
    CHECK(std::abs(moved[n] - base[n]) < dist / 99.0);

  // permutation invariance
  Rng prng(6);
  std::vector<size_t> order = {3, 1, 4, 0, 2};
  std::vector<NormalizedWindow> perm;
  std::vector<NormalizedWindow> five(5);
  for (auto& w : five) {
    w.samples.resize(3);
    for (auto& v : w.samples) v = {prng.normal(), prng.normal()};
  }
  for (size_t i : order) perm.push_back(five[i]);
  CHECK(complex_median_prototype(five) == complex_median_prototype(perm));

  CHECK_THROWS_AS(complex_median_prototype({}), std::invalid_argument);
}

TEST_CASE("principal direction recovers a planted rank-1 structure") {
  const size_t n_w = 6;
  std::vector<cdouble> v(n_w);
  Rng rng(11);
  for (auto& x : v) x = {rng.normal(), rng.normal()};
  const double vn = l2(v);
  for (auto& x : v) x /= vn;

  std::vector<NormalizedWindow> windows(64);
  for (auto& w : windows) {
    const double c = 1.0 + 0.8 * rng.normal();  // mostly positive weights
    w.samples.resize(n_w);
    for (size_t n = 0; n < n_w; ++n) w.samples[n] = c * v[n];
  }
  auto proto = complex_median_prototype(windows);
  auto p = first_principal_component(windows, proto);
  REQUIRE(p.size() == n_w);
  CHECK(l2(p) == doctest::Approx(1.0).epsilon(1e-9));
  double err = 0.0;
  for (size_t n = 0; n < n_w; ++n) err = std::max(err, std::abs(p[n] - v[n]));
  CHECK(err < 1e-6);
}

TEST_CASE("principal direction dominates random probes") {
  const size_t n_w = 5;
  Rng rng(21);
  std::vector<NormalizedWindow> windows(300);
  for (auto& w : windows) {
    w.samples.resize(n_w);
    for (size_t n = 0; n < n_w; ++n)
      // anisotropic: early coordinates swing harder
      w.samples[n] = {(2.0 - 0.3 * n) * rng.normal(), 0.5 * rng.normal()};
  }
  auto proto = complex_median_prototype(windows);
  auto p = first_principal_component(windows, proto);

  const size_t d = 2 * n_w;
  auto project_var = [&](const std::vector<double>& dir) {
    std::vector<double> proj;
    for (const auto& w : windows) {
      double s = 0.0;
      for (size_t n = 0; n < n_w; ++n)
        s += dir[n] * w.samples[n].real() + dir[n + n_w] * w.samples[n].imag();
      proj.push_back(s);
    }
    double mean = 0.0;
    for (double x : proj) mean += x;
    mean /= proj.size();
    double var = 0.0;
    for (double x : proj) var += (x - mean) * (x - mean);
    return var / (proj.size() - 1);
  };

  std::vector<double> u(d);
  for (size_t n = 0; n < n_w; ++n) {
    u[n] = p[n].real();
    u[n + n_w] = p[n].imag();
  }
  const double top = project_var(u);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> r(d);
    double norm = 0.0;
    for (auto& x : r) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : r) x /= norm;
    CHECK(project_var(r) <= top * (1.0 + 1e-9));
  }
}

TEST_CASE("isotropic windows have no dominant direction") {
  const size_t n_w = 8;
  Rng rng(31);
  std::vector<NormalizedWindow> windows(2000);
  for (auto& w : windows) {
    w.samples.resize(n_w);
    for (auto& v : w.samples) v = rng.cnormal();
  }
  auto proto = complex_median_prototype(windows);
  auto p = first_principal_component(windows, proto);

  // explained-variance ratio stays near 1/(2 n_w)
  const size_t d = 2 * n_w;
  Eigen::MatrixXd x(windows.size(), d);
  for (size_t i = 0; i < windows.size(); ++i)
    for (size_t n = 0; n < n_w; ++n) {
      x(i, n) = windows[i].samples[n].real();
      x(i, n + n_w) = windows[i].samples[n].imag();
    }
  x.rowwise() -= x.colwise().mean();
  Eigen::VectorXd u(d);
  for (size_t n = 0; n < n_w; ++n) {
    u(static_cast<Eigen::Index>(n)) = p[n].real();
    u(static_cast<Eigen::Index>(n + n_w)) = p[n].imag();
  }
  const double along = (x * u).squaredNorm();
  const double total = x.squaredNorm();
  const double ratio = along / total;
  CHECK(ratio > 0.5 / d);
  CHECK(ratio < 2.0 / d);
}

TEST_CASE("degenerate window sets are rejected") {
  NormalizedWindow w;
  w.samples = {{1.0, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(first_principal_component({w}, w.samples),
                  std::invalid_argument);
  std::vector<NormalizedWindow> same(5, w);
  CHECK_THROWS_AS(first_principal_component(same, w.samples),
                  std::invalid_argument);
}

TEST_CASE("composed trigger hits the energy budget exactly") {
  ClassStats stats;
  Rng rng(41);
  stats.prototype.resize(8);
  for (auto& v : stats.prototype) v = 0.7 * rng.cnormal();
  stats.principal.resize(8);
  double norm = 0.0;
  for (auto& v : stats.principal) {
    v = rng.cnormal();
    norm += std::norm(v);
  }
  norm = std::sqrt(norm);
  for (auto& v : stats.principal) v /= norm;

  for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (double kappa : {-24.0, -21.0, -18.0, -15.0}) {
      const double alpha = std::pow(10.0, kappa / 20.0) * 1.3;
      auto t = compose_trigger(stats, lambda, alpha, kappa);
      CHECK(std::abs(l2(t.vector) - alpha) < 1e-9);
      CHECK(t.lambda_mix == lambda);
      CHECK(t.kappa_db == kappa);
    }
  }

  // closed forms at the endpoints
  auto pure_proto = compose_trigger(stats, 1.0, 2.0);
  const double pn = l2(stats.prototype);
  for (size_t n = 0; n < 8; ++n)
    CHECK(std::abs(pure_proto.vector[n] - stats.prototype[n] * (2.0 / pn)) <
          1e-9);
  auto pure_pc = compose_trigger(stats, 0.0, 2.0);
  for (size_t n = 0; n < 8; ++n)
    CHECK(std::abs(pure_pc.vector[n] - 2.0 * stats.principal[n]) < 1e-9);

  ClassStats degenerate;
  degenerate.prototype = stats.principal;
  for (auto& v : degenerate.prototype) v = -v;
  degenerate.principal = stats.principal;
  CHECK_THROWS_AS(compose_trigger(degenerate, 0.5, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(compose_trigger(stats, 1.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(compose_trigger(stats, 0.5, -1.0), std::invalid_argument);
}

TEST_CASE("energy budget follows the dB arithmetic") {
  std::vector<cdouble> unit_rms = {{1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0},
                                   {0.0, 1.0}};
  auto b = energy_budget_alpha(unit_rms, -20.0);
  CHECK(b.alpha == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_FALSE(b.silent);

  auto ident = energy_budget_alpha(unit_rms, 0.0);
  CHECK(ident.alpha == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<cdouble> rms2 = {{2.0, 0.0}, {0.0, 2.0}};
  auto k15 = energy_budget_alpha(rms2, -15.0);
  CHECK(k15.alpha == doctest::Approx(0.35566).epsilon(1e-4));

  std::vector<cdouble> silent(4, cdouble{0.0, 0.0});
  auto z = energy_budget_alpha(silent, -15.0);
  CHECK(z.alpha == 0.0);
  CHECK(z.silent);

  // pooled: windows of amplitude 1 and sqrt(7) pool to RMS 2
  std::vector<NormalizedWindow> pool(2);
  pool[0].samples.assign(8, cdouble{1.0, 0.0});
  pool[1].samples.assign(8, cdouble{std::sqrt(7.0), 0.0});
  auto pooled = pooled_energy_budget(pool, 0.0);
  CHECK(pooled.alpha == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("trigger spec survives serialization") {
  ClassStats stats;
  Rng rng(55);
  stats.prototype.resize(4);
  stats.principal.resize(4);
  double norm = 0.0;
  for (auto& v : stats.prototype) v = rng.cnormal();
  for (auto& v : stats.principal) {
    v = rng.cnormal();
    norm += std::norm(v);
  }
  norm = std::sqrt(norm);
  for (auto& v : stats.principal) v /= norm;

  auto spec = compose_trigger(stats, 0.5, 0.25, -15.0, {2, 7});
  auto text = trigger_to_json(spec);
  auto back = trigger_from_json(text);
  CHECK(back.vector == spec.vector);
  CHECK(back.window_indices == spec.window_indices);
  CHECK(back.lambda_mix == spec.lambda_mix);
  CHECK(back.alpha == spec.alpha);
  CHECK(back.kappa_db == spec.kappa_db);
  CHECK(trigger_content_id(back) == trigger_content_id(spec));

  auto other = compose_trigger(stats, 0.75, 0.25, -15.0, {2, 7});
  CHECK(trigger_content_id(other) != trigger_content_id(spec));

  CHECK_THROWS_AS(trigger_from_json("{\"vector\": 3}"), FormatError);
}

TEST_CASE("full stats flow on a corpus") {
  auto ds = two_class_corpus(12, 1.0, 2.0, 9);
  auto spec = WindowingSpec::for_symbol(24, 8);
  auto windows = collect_target_windows(ds, 1, 1, spec);
  auto stats = target_class_stats(windows);
  CHECK(stats.n_windows_used == 24);
  CHECK(stats.prototype.size() == 8);
  CHECK(l2(stats.principal) == doctest::Approx(1.0).epsilon(1e-9));

  auto budget = pooled_energy_budget(windows, -15.0);
  CHECK(budget.alpha == doctest::Approx(2.0 * std::pow(10.0, -0.75))
                            .epsilon(1e-9));
  auto trig = compose_trigger(stats, 0.5, budget.alpha, -15.0, {1});
  CHECK(std::abs(l2(trig.vector) - budget.alpha) < 1e-9);
}
