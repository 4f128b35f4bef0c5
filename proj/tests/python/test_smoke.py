"""End-to-end smoke test for the Python module. Runs standalone:

    PYTHONPATH=build/python python3 tests/python/test_smoke.py
"""

import math
import os
import shutil
import sys
import tempfile

import numpy as np

import amcbench as ab

FAILURES = []


def check(name, ok):
    print(f"{'ok' if ok else 'FAIL'}  {name}")
    if not ok:
        FAILURES.append(name)


def main():
    rng = np.random.default_rng(7)

    names = ab.schemes()
    check("eight schemes listed", len(names) == 8 and "QPSK" in names)

    for name in names:
        pts = ab.constellation(name)
        power = float(np.mean(np.abs(pts) ** 2))
        check(f"constellation {name} unit power", abs(power - 1.0) < 1e-12)

    w = rng.normal(size=16) + 1j * rng.normal(size=16)
    samples, phase = ab.phase_normalize(w)
    mean = complex(np.mean(samples))
    back = ab.denormalize(samples, phase)
    check("normalized mean phasor is real", abs(mean.imag) < 1e-12 and mean.real >= -1e-12)
    check("phase round trip", float(np.max(np.abs(back - w))) < 1e-12)
    check("amplitudes preserved", float(np.max(np.abs(np.abs(samples) - np.abs(w)))) < 1e-12)

    symbol = rng.normal(size=160) + 1j * rng.normal(size=160)
    grid = ab.partition(symbol, 16)
    check("partition shape", grid.shape == (10, 16))
    check("partition content", np.array_equal(grid.reshape(-1), symbol))

    windows = rng.normal(size=(40, 16)) + 1j * rng.normal(size=(40, 16)) + (0.9 - 0.4j)
    trig = ab.compose_trigger(windows, lambda_mix=0.5, alpha=0.25, kappa_db=0.0)
    check("trigger norm equals alpha", abs(float(np.linalg.norm(trig)) - 0.25) < 1e-9)

    alpha = ab.pooled_alpha(windows, kappa_db=-20.0)
    rms = float(np.sqrt(np.mean(np.abs(windows) ** 2)))
    check("pooled alpha follows rms", abs(alpha - 0.1 * rms) < 1e-12)
    check("window alpha at 0 db is rms",
          abs(ab.window_alpha(w, 0.0) - float(np.sqrt(np.mean(np.abs(w) ** 2)))) < 1e-12)

    pc = ab.principal_component(windows)
    check("principal component is unit", abs(float(np.linalg.norm(pc)) - 1.0) < 1e-9)

    idx = ab.anomaly_indices([1.0, 1.05, 0.95, 1.0, 0.05])
    check("anomaly index flags the outlier", idx[4] > 2.0 and max(idx[:4]) < 2.0)

    check("rho_v scales with planted windows",
          ab.rho_v_percent(2, 16, 128) == 2 * ab.rho_v_percent(1, 16, 128))

    check("spearman of a monotone pair", ab.spearman([1, 2, 3, 4], [2, 4, 5, 9]) == 1.0)

    frame = rng.normal(size=(2, 80)) + 1j * rng.normal(size=(2, 80))
    out = ab.rapp_pa(frame, smoothness=2.0, ibo_db=3.0)
    check("pa compresses amplitudes", bool(np.all(np.abs(out) <= np.abs(frame) + 1e-12)))
    check("pa keeps phases",
          float(np.max(np.abs(np.angle(out) - np.angle(frame)))) < 1e-9)

    # a pipeline small enough to finish in seconds
    work = tempfile.mkdtemp(prefix="amcb_smoke_")
    try:
        cfg_path = os.path.join(work, "tiny.cfg")
        with open(cfg_path, "w") as f:
            f.write(
                "dataset.n_examples = 600\n"
                "dataset.classes = bpsk, qpsk, qam16\n"
                "dataset.snr_grid_db = 10\n"
                "model.archs = mlp\n"
                "attack.surrogate = mlp\n"
                "defend.arch = mlp\n"
                "train.epochs = 2\n"
                "attack.n_permutations = 20\n"
                "attack.symbols_per_class = 4\n"
                "attack.bg_pool = 32\n"
                "eval.snr_grid_db = 10\n"
                "eval.n_frames = 60\n"
                "defend.strip_frames = 40\n"
                "defend.strip_overlays = 10\n"
                "defend.anomaly_steps = 20\n"
                "defend.anomaly_frames = 12\n"
                "run.master_seed = 5\n"
            )
        out_a = ab.run(cfg_path, os.path.join(work, "a"), goal="run")
        stages = [s["stage"] for s in out_a["stages"]]
        check("all stages ran", stages[0] == "generate" and "evaluate" in stages)
        check("nothing cached on a fresh run", not any(s["cached"] for s in out_a["stages"]))
        rows = out_a["metrics"]
        kinds = {r["metric"] for r in rows}
        check("metric rows cover asr/alc/abc", kinds == {"ASR", "ALC", "ABC"})
        check("metric values are percentages",
              all(0.0 <= r["value"] <= 100.0 for r in rows))

        out_b = ab.run(cfg_path, os.path.join(work, "a"), goal="run")
        check("second run is fully cached", all(s["cached"] for s in out_b["stages"]))
        # cached rows come back through the csv, which keeps 10 digits
        same = len(out_b["metrics"]) == len(rows) and all(
            a["model"] == b["model"] and a["metric"] == b["metric"]
            and a["snr_db"] == b["snr_db"]
            and math.isclose(a["value"], b["value"], rel_tol=1e-9, abs_tol=1e-9)
            for a, b in zip(out_b["metrics"], rows)
        )
        check("cached metrics match", same)

        data = ab.load_dataset(os.path.join(work, "a", "dataset.bin"))
        check("dataset tensor shape", data["x"].shape == (600, 4, 128, 2))
        check("train/test split", data["n_train"] + data["n_test"] == 600)
        check("labels cover the classes", set(np.unique(data["labels"])) == {0, 1, 2})
        check("class names stored", data["classes"] == ["BPSK", "QPSK", "QAM16"])
    finally:
        shutil.rmtree(work, ignore_errors=True)

    if FAILURES:
        print(f"\n{len(FAILURES)} failed")
        return 1
    print("\nall passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
