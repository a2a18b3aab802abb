"""Smoke test for the kpzlat_py extension.

Build and install the module first, e.g.

    pip install maturin
    maturin develop -m crates/python/Cargo.toml --release

then run `python python/smoke_test.py`.
"""

import csv
import math
import statistics
import tempfile
from pathlib import Path

import kpzlat_py as k


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL {what}")
    print(f"ok   {what}")


def main():
    check(k.seed_stream(0, ["replica", 7]) == 13549246288490936611, "seed stream golden value")

    toda = k.Potential.toda()
    t = k.coupling_tensors(toda)
    check(t["gamma"] == [-0.5] and abs(t["delta"][0] - 1 / 6) < 1e-15, "toda third and fourth order tensors")
    check(abs(toda.gradient([0.3])[0] - (1 - math.exp(-0.3))) < 1e-15, "toda gradient")

    fam = k.coupling_tensors(k.Potential.family(1.5), [0.0, 0.0])
    check(fam["constraint_residual"] < 1e-12 and fam["eta"] == 0.0, "family meets the frame conditions")

    qv = k.qv_estimate(512, "sin1", 0.0, 1.0)
    check(abs(qv / (2 * math.pi**2) - 1) < 0.05, "quadratic variation near 2 pi^2")

    xs = [u[0] for u in k.sample_sites(k.Potential.quadratic(1), 0.1, 20000, 3)]
    check(abs(statistics.fmean(xs)) < 0.05 and abs(statistics.pvariance(xs) - 1) < 0.05, "gaussian site sampler")

    run = k.simulate(toda, 16, 0.01, [0.0, 0.01], 5)
    check(len(run["states"]) == 2 and max(run["conservation_drift"]) < 1e-8, "lattice run conserves the species sums")

    with tempfile.TemporaryDirectory() as d:
        out = k.run_experiment("tensors", overrides=[f'out="{d}"'])
        with open(Path(out["dir"]) / "tensors.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        check(len(rows) == 1 and float(rows[0]["gamma"]) == -0.5, "harness tensors run")
        try:
            k.run_experiment("simulate", overrides=["sizes=[]", f'out="{d}"'])
        except ValueError:
            check(True, "configuration errors raise ValueError")
        else:
            check(False, "configuration errors raise ValueError")


if __name__ == "__main__":
    main()
