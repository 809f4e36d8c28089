"""Compare the numba kernels with their pure-numpy fallbacks.

Run ``python benchmarks/bench_kernels.py``. Each kernel is timed on both
backends after one warm-up call (which absorbs numba compilation) and the
outputs are checked for agreement before any timing is reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from idlenes import kernels
from idlenes.radio import _blockers, _budget
from idlenes.twin import TwinConfig, generate


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def link_map_case(size, poles, resolution):
    sc = generate(TwinConfig(width=size, height=size, n_poles=poles, tp_resolution=resolution, seed=1))
    bld, fol = _blockers(sc.buildings, sc.foliage)
    beams = np.array([[b.as_row() for b in c.candidate_beam_pool] for c in sc.cells])
    args = (
        np.array([c.position for c in sc.cells]),
        np.array([c.boresight_azimuth for c in sc.cells]),
        np.array([c.tx_power for c in sc.cells]),
        beams,
        sc.traffic_points,
        sc.rf_params.ue_height,
        bld,
        fol,
        _budget(sc.rf_params),
    )
    label = f"link map {sc.n_cells} cells x 72 beams x {sc.n_tp} points"
    return label, (lambda nb: kernels.link_snr_matrix(*args, use_numba=nb))


def enumeration_case(n_vars, n_rows, seed=0):
    rng = np.random.default_rng(seed)
    G = (rng.random((n_rows, n_vars)) < 0.3).astype(np.int64)
    G[np.arange(n_rows), rng.integers(0, n_vars, n_rows)] = 1
    h = np.ones(n_rows, dtype=np.int64)
    c = rng.integers(1, 10, n_vars).astype(np.float64)
    label = f"brute force 2^{n_vars} assignments x {n_rows} rows"
    return label, (lambda nb: kernels.enumerate_binary(c, G, h, use_numba=nb))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small problem sizes")
    args = ap.parse_args(argv)
    if args.quick:
        cases = [link_map_case(60, 2, 2.0), enumeration_case(14, 20)]
    else:
        cases = [link_map_case(120, 6, 1.0), enumeration_case(20, 40)]
    print(f"{'case':58s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for label, run in cases:
        ref = run(False)
        out = run(True)  # warm-up and compile
        if not np.allclose(np.asarray(out), np.asarray(ref), atol=1e-9):
            raise SystemExit(f"{label}: backends disagree")
        t_nb = _best_of(lambda: run(True), args.repeat)
        t_np = _best_of(lambda: run(False), args.repeat)
        print(f"{label:58s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
