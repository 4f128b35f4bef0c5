// Python surface over the core. Arrays cross the boundary as numpy; frames
// are (symbols, samples) complex128, window stacks are (count, window_len).

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "amcbench/attribution.hpp"
#include "amcbench/common.hpp"
#include "amcbench/config.hpp"
#include "amcbench/datastore.hpp"
#include "amcbench/defense.hpp"
#include "amcbench/metrics.hpp"
#include "amcbench/pipeline.hpp"
#include "amcbench/poisoner.hpp"
#include "amcbench/sigchain.hpp"
#include "amcbench/triggergen.hpp"

namespace py = pybind11;
using namespace amcbench;

namespace {

using carr = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

std::vector<cdouble> to_cvec(const carr& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d complex array");
  const auto* p = a.data();
  return std::vector<cdouble>(p, p + a.shape(0));
}

py::array_t<std::complex<double>> from_cvec(const std::vector<cdouble>& v) {
  py::array_t<std::complex<double>> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<std::complex<double>> from_rows(
    const std::vector<std::vector<cdouble>>& rows) {
  py::ssize_t n = static_cast<py::ssize_t>(rows.size());
  py::ssize_t m = n ? static_cast<py::ssize_t>(rows[0].size()) : 0;
  py::array_t<std::complex<double>> out({n, m});
  auto* p = out.mutable_data();
  for (py::ssize_t i = 0; i < n; ++i)
    std::copy(rows[i].begin(), rows[i].end(), p + i * m);
  return out;
}

// Rows become phase-normalized windows, matching how the trigger stage
// collects them from stored frames.
std::vector<NormalizedWindow> to_windows(const carr& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d complex array");
  std::vector<NormalizedWindow> out;
  out.reserve(static_cast<size_t>(a.shape(0)));
  const auto* p = a.data();
  py::ssize_t m = a.shape(1);
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    out.push_back(phase_normalize(std::vector<cdouble>(p + i * m, p + (i + 1) * m)));
  return out;
}

IqFrame to_frame(const carr& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d complex array");
  IqFrame f;
  const auto* p = a.data();
  py::ssize_t m = a.shape(1);
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    f.symbols.emplace_back(p + i * m, p + (i + 1) * m);
  f.per_symbol_phase.assign(f.symbols.size(), 0.0);
  return f;
}

py::dict metric_rows_to_dicts(const std::vector<MetricRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["model"] = r.model_arch;
    d["snr_db"] = r.snr_db;
    d["metric"] = std::string(metric_name(r.metric));
    d["value"] = r.value;
    d["seed"] = r.run_seed;
    out.append(d);
  }
  py::dict top;
  top["metrics"] = out;
  return top;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "OFDM modulation-classifier backdoor benchmark core";
  m.attr("__version__") = kVersion;

  m.def("schemes", [] {
    std::vector<std::string> names;
    for (size_t i = 0; i < kNumSchemes; ++i)
      names.emplace_back(scheme_name(static_cast<ModulationScheme>(i)));
    return names;
  });

  m.def(
      "constellation",
      [](const std::string& name) {
        auto s = scheme_from_name(name);
        if (!s) throw std::invalid_argument("unknown scheme '" + name + "'");
        return from_cvec(constellation(*s).points);
      },
      py::arg("scheme"));

  m.def(
      "rapp_pa",
      [](const carr& frame, double smoothness, double ibo_db) {
        PaConfig pa;
        pa.rapp_smoothness = smoothness;
        pa.ibo_db = ibo_db;
        return from_rows(rapp_pa(to_frame(frame), pa).symbols);
      },
      py::arg("frame"), py::arg("smoothness") = 2.0, py::arg("ibo_db") = 3.0,
      "Rapp AM/AM compression over a (symbols, samples) frame.");

  m.def(
      "phase_normalize",
      [](const carr& window) {
        auto nw = phase_normalize(to_cvec(window));
        return py::make_tuple(from_cvec(nw.samples), nw.stored_phase);
      },
      py::arg("window"),
      "Rotate so the mean phasor is non-negative real; returns (samples, phase).");

  m.def(
      "denormalize",
      [](const carr& samples, double phase) {
        NormalizedWindow nw{to_cvec(samples), phase};
        return from_cvec(denormalize(nw));
      },
      py::arg("samples"), py::arg("phase"));

  m.def(
      "partition",
      [](const carr& symbol, uint32_t window_len) {
        auto v = to_cvec(symbol);
        auto spec = WindowingSpec::for_symbol(v.size(), window_len);
        return from_rows(partition(v, spec));
      },
      py::arg("symbol"), py::arg("window_len"));

  m.def(
      "class_prototype",
      [](const carr& windows) {
        return from_cvec(complex_median_prototype(to_windows(windows)));
      },
      py::arg("windows"),
      "Per-sample complex median over phase-normalized rows.");

  m.def(
      "principal_component",
      [](const carr& windows) {
        auto w = to_windows(windows);
        auto proto = complex_median_prototype(w);
        return from_cvec(first_principal_component(w, proto));
      },
      py::arg("windows"));

  m.def(
      "compose_trigger",
      [](const carr& windows, double lambda_mix, double alpha, double kappa_db) {
        auto stats = target_class_stats(to_windows(windows));
        auto spec = compose_trigger(stats, lambda_mix, alpha, kappa_db);
        return from_cvec(spec.vector);
      },
      py::arg("windows"), py::arg("lambda_mix"), py::arg("alpha"),
      py::arg("kappa_db") = 0.0,
      "alpha * (lambda*prototype + (1-lambda)*principal) / ||mixture||.");

  m.def(
      "window_alpha",
      [](const carr& window, double kappa_db) {
        return energy_budget_alpha(to_cvec(window), kappa_db).alpha;
      },
      py::arg("window"), py::arg("kappa_db"),
      "10^(kappa/20) * RMS of the window.");

  m.def(
      "pooled_alpha",
      [](const carr& windows, double kappa_db) {
        return pooled_energy_budget(to_windows(windows), kappa_db).alpha;
      },
      py::arg("windows"), py::arg("kappa_db"));

  m.def("rho_v_percent", &rho_v_percent, py::arg("n_windows"),
        py::arg("window_len"), py::arg("n_subcarriers"));

  m.def(
      "anomaly_indices",
      [](const std::vector<double>& norms) {
        return anomaly_indices_from_norms(norms);
      },
      py::arg("norms"), "|norm - median| / (1.4826 * MAD + eps) per entry.");

  m.def("spearman", &spearman, py::arg("xs"), py::arg("ys"));

  m.def(
      "load_dataset",
      [](const std::string& path) {
        LabeledDataset data = load_dataset(path);
        size_t n = data.examples.size();
        size_t m = data.manifest.ofdm.symbols_per_frame;
        size_t nsub = data.manifest.ofdm.n_subcarriers;
        py::array_t<float> x({n, m, nsub, static_cast<size_t>(2)});
        py::array_t<uint16_t> labels(static_cast<py::ssize_t>(n));
        py::array_t<double> snr(static_cast<py::ssize_t>(n));
        auto* xp = x.mutable_data();
        auto* lp = labels.mutable_data();
        auto* sp = snr.mutable_data();
        size_t stride = m * nsub * 2;
        for (size_t i = 0; i < n; ++i) {
          const auto& ex = data.examples[i];
          if (ex.x.size() != stride) throw FormatError("frame tensor size mismatch");
          std::copy(ex.x.begin(), ex.x.end(), xp + i * stride);
          lp[i] = ex.label;
          sp[i] = ex.snr_db;
        }
        py::dict out;
        out["x"] = x;
        out["labels"] = labels;
        out["snr_db"] = snr;
        out["n_train"] = data.manifest.n_train;
        out["n_test"] = data.manifest.n_test;
        std::vector<std::string> names;
        for (auto s : data.manifest.classes)
          names.emplace_back(scheme_name(s));
        out["classes"] = names;
        return out;
      },
      py::arg("path"),
      "Stored dataset as x (n, symbols, subcarriers, 2) float32 plus labels.");

  m.def(
      "run",
      [](const std::string& config_path, const std::string& out_dir,
         const std::string& goal, py::object seed) {
        ExperimentConfig cfg = load_config_file(config_path);
        if (!seed.is_none()) cfg.master_seed = seed.cast<uint64_t>();
        RunSummary sum = run_experiment(cfg, out_dir, goal);
        py::dict out = metric_rows_to_dicts(sum.metrics);
        out["out_dir"] = sum.out_dir;
        py::list stages;
        for (const auto& st : sum.stages) {
          py::dict d;
          d["stage"] = std::string(stage_name(st.stage));
          d["cached"] = st.cache_hit;
          stages.append(d);
        }
        out["stages"] = stages;
        return out;
      },
      py::arg("config_path"), py::arg("out_dir"), py::arg("goal") = "run",
      py::arg("seed") = py::none(),
      "Run the pipeline up to a goal stage; returns stages and metric rows.");
}
