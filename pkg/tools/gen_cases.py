#!/usr/bin/env python3
"""Regenerate the case files shipped under src/zonefault/data/.

Both cases are synthetic but written in the MATPOWER text format the parser
consumes. bench118 is a 118-bus, 186-branch meshed transmission-scale
benchmark (including parallel line pairs and data the parser must zero out:
charging, taps, bus shunts). bench23 is a small case with a 10-node path
zone, one exterior partner per zone node, built for exact-recovery tests.

Deterministic: fixed seeds, stable formatting. Run from the repo root:

    python3 tools/gen_cases.py
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from zonefault.grid_model import parse_case  # noqa: E402
from zonefault.power_flow import InjectionSpec, solve_ac  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "zonefault" / "data"


def fmt_row(vals, widths):
    return "\t" + "\t".join(f"{v:>{w}}" for v, w in zip(vals, widths)) + ";"


def emit_case(name, base_mva, bus_rows, gen_rows, branch_rows) -> str:
    out = [f"function mpc = {name}", f"%% synthetic benchmark case {name}", "mpc.version = '2';", ""]
    out += ["%% system MVA base", f"mpc.baseMVA = {base_mva};", ""]
    out += ["%% bus data", "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin"]
    out.append("mpc.bus = [")
    for r in bus_rows:
        out.append("\t" + "\t".join(str(v) for v in r) + ";")
    out.append("];")
    out += ["", "%% generator data", "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin"]
    out.append("mpc.gen = [")
    for r in gen_rows:
        out.append("\t" + "\t".join(str(v) for v in r) + ";")
    out.append("];")
    out += ["", "%% branch data", "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax"]
    out.append("mpc.branch = [")
    for r in branch_rows:
        out.append("\t" + "\t".join(str(v) for v in r) + ";")
    out.append("];")
    out.append("")
    return "\n".join(out)


def bus_row(i, btype, pd, qd, gs=0, bs=0, vm=1.0):
    return [i, btype, pd, qd, gs, bs, 1, vm, 0, 138, 1, 1.1, 0.9]


def gen_row(bus, pg, vg, status=1, qg=0.0):
    return [bus, pg, qg, 300, -300, vg, 100, status, 600, 0]


def branch_row(f, t, r, x, b=0.0, ratio=0, angle=0, status=1):
    return [f, t, r, x, b, 0, 0, 0, ratio, angle, status, -360, 360]


def make_bench118() -> str:
    rng = np.random.default_rng(20240118)
    n = 118
    order = rng.permutation(np.arange(1, n + 1))
    edges = []
    edge_set = set()
    for i in range(1, n):
        # attach to a recent node: keeps the diameter transmission-like
        lo = max(0, i - 12)
        j = int(rng.integers(lo, i))
        a, b = int(order[i]), int(order[j])
        edges.append((a, b))
        edge_set.add(frozenset((a, b)))
    while len(edges) < 181:
        a, b = int(rng.integers(1, n + 1)), int(rng.integers(1, n + 1))
        if a == b or frozenset((a, b)) in edge_set:
            continue
        edges.append((a, b))
        edge_set.add(frozenset((a, b)))
    # five parallel pairs (duplicate existing corridors)
    for idx in rng.choice(len(edges), size=5, replace=False):
        edges.append(edges[int(idx)])
    assert len(edges) == 186

    degree = np.zeros(n + 1, dtype=int)
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    slack = int(np.argmax(degree))
    pv_candidates = [i for i in np.argsort(degree)[::-1] if i != slack and i != 0]
    pv_buses = sorted(int(b) for b in pv_candidates[:24])

    load_buses = sorted(
        int(b)
        for b in rng.choice(
            [i for i in range(1, n + 1) if i != slack], size=80, replace=False
        )
    )
    pd = {b: round(float(rng.uniform(8, 42)), 1) for b in load_buses}
    # near-unity power factors and a narrow setpoint band keep reactive
    # injections small relative to active ones, as in real transmission data
    qd = {b: round(pd[b] * float(rng.uniform(0.08, 0.22)), 1) for b in load_buses}
    total_load = sum(pd.values())
    shares = rng.uniform(0.6, 1.6, size=len(pv_buses))
    shares = shares / shares.sum() * total_load * 0.85
    pg = {b: round(float(s), 1) for b, s in zip(pv_buses, shares)}
    vg = {b: round(float(rng.uniform(1.0, 1.02)), 3) for b in pv_buses}
    vg[slack] = 1.01

    shunt_buses = sorted(int(b) for b in rng.choice(load_buses, size=4, replace=False))
    bus_rows = []
    for i in range(1, n + 1):
        btype = 3 if i == slack else (2 if i in pv_buses else 1)
        gs = 2.0 if i in shunt_buses[:2] else 0
        bs = 6.0 if i in shunt_buses[2:] else 0
        bus_rows.append(bus_row(i, btype, pd.get(i, 0), qd.get(i, 0), gs, bs))

    gen_rows = [gen_row(slack, 0.0, vg[slack])]
    gen_rows += [gen_row(b, pg[b], vg[b]) for b in pv_buses]

    # the pocket around these buses is a lower-voltage resistive subsystem;
    # the rest of the network is reactance-dominated transmission
    pocket = {7, 15, 30, 31, 50, 55, 83, 85, 90, 118}
    branch_rows = []
    tap_rows = set(int(i) for i in rng.choice(len(edges), size=8, replace=False))
    for idx, (a, b) in enumerate(edges):
        in_pocket = (a in pocket) and (b in pocket)
        x = round(float(rng.uniform(0.05, 0.28)), 4)
        if in_pocket:
            r = round(x * float(rng.uniform(1.7, 2.3)), 4)
        else:
            r = round(x / float(rng.uniform(4.0, 7.0)), 4)
        if idx in tap_rows and not in_pocket:
            r, ratio = 0.0, 1.02  # transformer-style row: pure reactance + tap
        else:
            ratio = 0
        chg = round(float(rng.uniform(0.02, 0.09)), 3) if rng.random() < 0.6 else 0.0
        branch_rows.append(branch_row(a, b, r, x, b=chg, ratio=ratio))

    return emit_case("bench118", 100, bus_rows, gen_rows, branch_rows)


def make_bench23() -> str:
    # exterior ring 1..10, zone path 11..20, one cut line per zone bus,
    # slack 21 and two PV units 22/23 hang off the ring
    bus_rows = []
    zone_pd = [18, 12, 22, 15, 9, 20, 14, 11, 16, 13]
    ext_pd = {2: 10, 4: 12, 7: 8, 9: 11}
    for i in range(1, 11):
        bus_rows.append(bus_row(i, 1, ext_pd.get(i, 0), round(ext_pd.get(i, 0) * 0.15, 1)))
    for j, p in enumerate(zone_pd, start=11):
        bus_rows.append(bus_row(j, 1, p, round(p * 0.15, 1)))
    bus_rows.append(bus_row(21, 3, 0, 0))
    bus_rows.append(bus_row(22, 2, 0, 0))
    bus_rows.append(bus_row(23, 2, 0, 0))

    gen_rows = [
        gen_row(21, 0.0, 1.01),
        gen_row(22, 70.0, 1.005),
        gen_row(23, 65.0, 1.0),
        gen_row(9, 0.0, 1.0, status=0),  # mothballed unit: dropped at load
    ]

    branch_rows = []
    ring = list(range(1, 11))
    for a, b in zip(ring, ring[1:] + ring[:1]):
        branch_rows.append(branch_row(a, b, 0.02, round(0.08 + 0.004 * a, 3), b=0.03))
    path = list(range(11, 21))
    for a, b in zip(path, path[1:]):
        branch_rows.append(branch_row(a, b, round(0.2 + 0.006 * (a - 10), 3), round(0.1 + 0.003 * (a - 10), 3)))
    for i in range(1, 11):
        branch_rows.append(branch_row(i, 10 + i, 0.018, round(0.09 + 0.002 * i, 3)))
    branch_rows.append(branch_row(21, 1, 0.01, 0.05))
    branch_rows.append(branch_row(21, 5, 0.012, 0.06))
    branch_rows.append(branch_row(22, 3, 0.014, 0.07))
    branch_rows.append(branch_row(23, 8, 0.014, 0.07))
    branch_rows.append(branch_row(2, 7, 0.03, 0.2, status=0))  # spare corridor, out of service

    return emit_case("bench23", 100, bus_rows, gen_rows, branch_rows)


def check(name, text):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grid = parse_case(text)
    outcome = solve_ac(grid, InjectionSpec.from_grid(grid))
    vm = np.abs(outcome.voltages) if outcome.converged else None
    print(
        f"{name}: n={grid.n} m={grid.m} converged={outcome.converged} "
        f"iters={outcome.iterations}"
        + (f" |V| in [{vm.min():.3f}, {vm.max():.3f}]" if vm is not None else "")
    )
    return grid, outcome


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    b118 = make_bench118()
    (DATA / "bench118.m").write_text(b118)
    b23 = make_bench23()
    (DATA / "bench23.m").write_text(b23)
    check("bench118", b118)
    check("bench23", b23)


if __name__ == "__main__":
    main()
