"""Acceptance criteria, one test each, every test printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` to see the summary block.
"""

import json
import math
import os
import time

import numpy as np
import pytest
from oracles import dense_vectors, subtree_oracle, wloa_oracle

from igk import reports
from igk.analysis import check_monotonic_decrease, check_wloa_bound, margin_curve
from igk.autodiff import Tensor
from igk.cli import gradient_check_error, main
from igk.consistency import consistency_loss, cosine_distance_matrix, predicted_prob
from igk.graph import SyntheticSpec, generate_synthetic
from igk.kernels import KernelSpec, gram_series, histmin, omega_weights, subtree_kernel, wloa_kernel
from igk.metrics import spearman
from igk.wl import refine_collection

DATA = os.path.join(os.path.dirname(reports.__file__), "data")


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


@pytest.fixture(scope="module")
def er50():
    return generate_synthetic(SyntheticSpec("er", (20,), count=50, p=0.2), 0)


def test_01_counterexample(capsys, record):
    t0 = time.perf_counter()
    code, rep, err = cli(capsys, "verify", "--check", "counterexample")
    elapsed = time.perf_counter() - t0
    a, b = rep["results"]["checks"]["counterexample"]["values"]
    ok = (code == 0 and abs(a - 0.0400) <= 5e-4 and abs(b - 0.0404) <= 5e-4 and a < b
          and elapsed < 1.0)
    record(1, ok, f"normalised WL-subtree ({a:.6f}, {b:.6f}), {elapsed:.2f}s")
    assert ok


def test_02_histmin(record):
    v = histmin({"a": 2, "b": 2, "c": 1}, {"a": 1, "b": 2, "c": 2})
    record(2, v == 4, f"histmin = {v}")
    assert v == 4


def test_03_wloa_monotonic(er50, record):
    t0 = time.perf_counter()
    rep = check_monotonic_decrease(gram_series(er50, KernelSpec("wloa", 6)), tolerance=1e-9)
    elapsed = time.perf_counter() - t0
    ok = rep.ok and elapsed < 30
    record(3, ok, f"{len(rep.violations)} violations / {rep.checked_count} pairs, {elapsed:.2f}s")
    assert ok


def test_04_wloa_self_kernel(mini, wlcx, record):
    graphs = list(mini) + list(wlcx)
    seqs = refine_collection(graphs, 6)
    bad = 0
    for omega in ("constant_one", "linear"):
        w = omega_weights(omega, 6).astype(int)
        for g, s in zip(graphs, seqs):
            for h in range(1, 7):
                bad += wloa_kernel(s, s, h, omega) != g.node_count * int(w[1:h + 1].sum())
    record(4, bad == 0, f"{bad} mismatches over {len(graphs)} graphs, h=1..6, two weightings")
    assert bad == 0


def test_05_wloa_bound(er50, record):
    rep = check_wloa_bound(gram_series(er50, KernelSpec("wloa", 6)), tolerance=1e-12)
    record(5, rep.ok, f"{len(rep.violations)} violations / {rep.checked_count} triples")
    assert rep.ok


def test_06_margin(record):
    col = generate_synthetic(SyntheticSpec("er_vs_ba", (10, 12, 14), count=30, p=0.3), 0)
    curve = margin_curve(gram_series(col, KernelSpec("wloa", 6)))
    ok = curve.is_non_decreasing(1e-12)
    record(6, ok, "margins " + ", ".join(f"{m:.4f}" for m in curve.margins))
    assert ok


def test_07_subtree_violation(wlcx, capsys, record):
    rep = check_monotonic_decrease(gram_series(wlcx, KernelSpec("wl_subtree", 2)))
    code, _, _ = cli(capsys, "analyze", "--dataset", os.path.join(DATA, "wl_counterexample"),
                     "--kernel", "wl-subtree", "--iterations", 2, "--property", "monotonic")
    v = rep.violations[0] if rep.violations else None
    ok = len(rep.violations) >= 1 and code == 1
    record(7, ok, f"{len(rep.violations)} violation(s)"
           + (f", {v.rhs:.5f} -> {v.lhs:.5f}" if v else "") + f", exit code {code}")
    assert ok


def test_08_gradient_check(record):
    t0 = time.perf_counter()
    err = gradient_check_error(eps=1e-5)
    elapsed = time.perf_counter() - t0
    ok = err < 1e-4 and elapsed < 10
    record(8, ok, f"max relative error {err:.2e}, {elapsed:.2f}s")
    assert ok


def test_09_invariances(record):
    rng = np.random.default_rng(2024)
    worst_scale = worst_comp = 0.0
    for _ in range(100):
        n, d = int(rng.integers(3, 9)), int(rng.integers(1, 6))
        layers = [rng.normal(size=(n, d)) for _ in range(3)]
        scales = [rng.uniform(0.01, 100, size=(n, 1)) for _ in layers]
        a = consistency_loss([Tensor(L) for L in layers], rng=np.random.default_rng(0)).item()
        b = consistency_loss([Tensor(L * s) for L, s in zip(layers, scales)],
                             rng=np.random.default_rng(0)).item()
        worst_scale = max(worst_scale, abs(a - b))
        D = cosine_distance_matrix(layers[-1])
        for k in range(n):
            for x in range(n):
                for y in range(n):
                    if len({k, x, y}) == 3:
                        worst_comp = max(worst_comp, abs(predicted_prob(D, k, x, y)
                                                         + predicted_prob(D, k, y, x) - 1))
    ok = worst_scale < 1e-10 and worst_comp < 1e-12
    record(9, ok, f"max scale change {worst_scale:.1e}, max complement gap {worst_comp:.1e}")
    assert ok


def test_10_bruteforce_oracle(mini, wlcx, record):
    graphs = [g for g in list(mini) + list(wlcx) if g.node_count <= 6]
    vecs = dense_vectors(graphs, 3)
    seqs = refine_collection(graphs, 3)
    bad = checked = 0
    for h in (1, 2, 3):
        for a in range(len(graphs)):
            for b in range(len(graphs)):
                checked += 2
                bad += subtree_kernel(seqs[a], seqs[b], h) != subtree_oracle(vecs, a, b, h)
                bad += wloa_kernel(seqs[a], seqs[b], h) != wloa_oracle(vecs, a, b, h)
    record(10, bad == 0, f"{bad} mismatches / {checked} kernel values on {len(graphs)} graphs")
    assert bad == 0


def test_11_spearman(record):
    vals = (spearman([1, 2, 3, 4], [1, 2, 3, 4]), spearman([1, 2, 3, 4], [4, 3, 2, 1]),
            spearman([1, 1, 2], [1, 2, 3]))
    ok = vals[0] == 1.0 and vals[1] == -1.0 and abs(vals[2] - 0.8660) <= 1e-4
    record(11, ok, "identical {:.4f}, reversed {:.4f}, tied {:.4f}".format(*vals))
    assert ok


def test_12_directional_rho(capsys, record):
    t0 = time.perf_counter()
    code, rep, _ = cli(capsys, "train", "--synthetic", "cycles_vs_paths", "--count", 60,
                       "--sizes", "4,5,6,7,8,9", "--epochs", 50, "--consistency", "all",
                       "--lambda", 1, "--seeds", "0,1,2,3,4", "--compare")
    elapsed = time.perf_counter() - t0
    rows = rep["results"]["comparison"]
    rho_wins = sum(r["rho_on"] is not None and r["rho_off"] is not None
                   and r["rho_on"] >= r["rho_off"] for r in rows)
    acc_wins = sum(r["accuracy_on"] >= r["accuracy_off"] for r in rows)
    ok = code == 0 and rho_wins >= 4 and acc_wins >= 3 and elapsed < 300
    pairs = " ".join(f"{r['rho_off']:.3f}->{r['rho_on']:.3f}" for r in rows)
    record(12, ok, f"rho wins {rho_wins}/5, accuracy wins {acc_wins}/5, {elapsed:.1f}s [{pairs}]")
    assert ok


def test_13_determinism(tmp_path, capsys, record):
    commands = [
        ["kernel", "--dataset", os.path.join(DATA, "mini"), "--kernel", "wloa", "--normalize",
         "--out", tmp_path / "k"],
        ["analyze", "--synthetic", "er", "--count", 30, "--sizes", "12", "--property", "order"],
        ["analyze", "--histograms", os.path.join(DATA, "subtree_counterexample.json"),
         "--kernel", "wl-subtree", "--iterations", 2, "--property", "monotonic"],
        ["train", "--synthetic", "cycles_vs_paths", "--count", 30, "--epochs", 5,
         "--dropout", 0.3, "--seed", 3],
        ["verify", "--check", "all"],
    ]
    same = 0
    for argv in commands:
        _, a, _ = cli(capsys, *argv)
        _, b, _ = cli(capsys, *argv)
        same += reports.results_bytes(a) == reports.results_bytes(b)
    ok = same == len(commands)
    record(13, ok, f"{same}/{len(commands)} commands byte-identical on repeat")
    assert ok
