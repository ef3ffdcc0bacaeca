"""Fit the service-time and load constants in the ``paper`` preset.

The reference tables give end-to-end numbers only, so the constants are
chosen by minimax fitting of closed-form approximations of the simulator:

* latency: client hop, two proof verifications, contract execution, half a
  batch timeout, the engine stages and validation, and the hop back.  Per-
  record costs are paid once per block, so they scale with
  ``records per second * batch timeout``.
* throughput: a background stream ``c`` plus ``a + b * rate`` ledger records
  per request, seen through the measurement window (duration plus the tail
  latency).

Both fits are linear programs.  Run ``python3 demos/calibrate.py --check`` to
also simulate the fitted preset and print deviations against the tables.
"""
import argparse

import numpy as np
from scipy.optimize import linprog

from flacsim.bench import reference_curve

ENGINES = ("Solo", "Raft", "SoloRaft")
HOP = 12.5  # mean of per_hop_ms = 5, 20
VERIFY = 30.0  # mean of verify_ms = 10, 50
CONTRACT = 10.0  # mean of contract_exec_ms = 5, 15
DURATION_S = 10.0


def table(name, col):
    c = reference_curve(name, col)
    return np.array(c.xs), np.array(c.ys)


def fit_latency(timeout_ms):
    """Shared stage constants for all three engines.

    Unknowns: orderer block, validate block, raft block + quorum hop cost,
    orderer per-tx, validate per-tx, raft per-tx (leader + follower).
    """
    base = HOP + 2 * VERIFY + CONTRACT + timeout_ms / 2 + HOP + HOP
    rows, rhs = [], []
    for eng in ENGINES:
        _, thr = table("Send Rate vs. Throughput", eng)
        _, lat = table("Send Rate vs. Latency", eng)
        for r, L in zip(thr, lat):
            n = r * timeout_ms / 1000.0
            coef = np.zeros(7)
            coef[1], coef[4] = 1.0, n
            if eng != "Raft":
                coef[0], coef[3] = 1.0, n
            if eng != "Solo":
                coef[2], coef[5] = 1.0, n
            a = coef.copy()
            a[6] = -L
            rows.append(a)
            rhs.append(L - base)
            b = -coef
            b[6] = -L
            rows.append(b)
            rhs.append(base - L)
    res = linprog(np.r_[np.zeros(6), 1.0], A_ub=rows, b_ub=rhs, bounds=[(0, None)] * 7)
    ob, vb, raft_fixed, ot, vt, rt2 = res.x[:6]
    # raft_fixed = 2 * raft_block + expected quorum round trip (two hops)
    return {
        "orderer_block_ms": ob,
        "validate_block_ms": vb,
        "raft_block_ms": max(0.0, (raft_fixed - 2 * HOP) / 2),
        "orderer_tx_ms": ot,
        "validate_tx_ms": vt,
        "raft_tx_ms": rt2 / 2,
        "max_error": res.x[6],
    }


def fit_throughput(eng):
    """Minimax fit of background rate c and fan-out a + b * rate (a >= 1)."""
    rates, thr = table("Send Rate vs. Throughput", eng)
    _, lat = table("Send Rate vs. Latency", eng)
    rows, rhs = [], []
    for lam, y, L in zip(rates, thr, lat):
        w = DURATION_S / (DURATION_S + L / 1000.0)
        coef = np.array([w, w * lam, w * lam * lam])
        rows.append(np.r_[coef, -y])
        rhs.append(y)
        rows.append(np.r_[-coef, -y])
        rhs.append(-y)
    res = linprog([0, 0, 0, 1], A_ub=rows, b_ub=rhs, bounds=[(0, None), (1, None), (0, None), (0, None)])
    c, a, b, e = res.x
    return {"background_tps": c, "tx_per_request": a, "conflict_rate": b, "max_error": e}


def check():
    from flacsim.bench import compare_to_reference, ladder, run_sweep
    from flacsim.presets import load_preset

    for eng in ENGINES:
        p = load_preset("paper", "latency-sweep", eng)
        recs = run_sweep(p, ladder(p, 42))
        for name, metric in (("Send Rate vs. Latency", "mean_latency_ms"),
                             ("Send Rate vs. Throughput", "throughput_tps")):
            print(compare_to_reference(recs, reference_curve(name, eng), metric).to_text())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--timeout", type=float, default=200.0, help="batch timeout in ms")
    ap.add_argument("--check", action="store_true", help="simulate the shipped preset afterwards")
    args = ap.parse_args()
    lat = fit_latency(args.timeout)
    print("[consensus]")
    for k, v in lat.items():
        print(f"{k} = {v:.4g}" if k != "max_error" else f"# minimax latency error {v:.1%}")
    for eng in ENGINES:
        fit = fit_throughput(eng)
        print(f"\n[load:{eng}]  # minimax throughput error {fit.pop('max_error'):.1%}")
        for k, v in fit.items():
            print(f"{k} = {v:.4g}")
    if args.check:
        check()


if __name__ == "__main__":
    main()
