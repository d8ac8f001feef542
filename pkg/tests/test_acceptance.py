"""Acceptance gate: one test per criterion, each reporting PASS/FAIL."""
import json
import math
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from cache import q_grid, structure, structures
from oracles import kronig_penney_ground

from fracbands.analysis import (detect_gap_kink, detect_kink, fit_power_law, fit_shifted_power_law,
                                inversion_order, mass_decay_fit)
from fracbands.bands import effective_mass, gap_curve
from fracbands.core import brillouin_grid
from fracbands.gpr import fit_gpr, track_minima
from fracbands.harness import load_config, parse_config, run_sweep
from fracbands.harness.reports import build_families, inversion_report
from fracbands.analysis import scaling_exponents
from fracbands.solver import ProblemSpec, imaginary_time_solve, planewave_diagonalize, solve_bands

ROOT = Path(__file__).resolve().parents[1]
REF = (0.5, 1.5, 6.0)


def record(n, title, ok, detail):
    ACCEPTANCE[n] = (bool(ok), title, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {title}: {detail}")
    assert ok, f"criterion {n} ({title}) failed: {detail}"


def test_criterion_01_kronig_penney():
    bs = structure(2.0, REF)
    oracle = np.array([kronig_penney_ground(k, *REF) for k in bs.k_grid])
    err = float(np.max(np.abs(bs.energies[0] - oracle)))
    record(1, "q=2 vs Kronig-Penney roots", err <= 1e-6, f"max |dE| = {err:.2e} (tol 1e-6)")


def test_criterion_02_oracle_equivalence():
    worst = 0.0
    for q in (1.0, 1.5, 2.0, 2.5, 3.0):
        for geo in ((0.5, 1.5, 6.0), (1.0, 1.5, 6.0), (0.5, 1.5, 7.0)):
            prob = ProblemSpec.from_params(q, *geo)
            edge = math.pi / prob.period
            for k in (0.0, edge / 2, edge):
                states = solve_bands(prob, k, 2)
                diag = planewave_diagonalize(prob, k, n_bands=2)
                worst = max(worst, max(abs(s.energy - d) for s, d in zip(states, diag)))
    record(2, "imaginary time vs plane-wave diagonalization", worst <= 1e-8,
           f"max |dE| = {worst:.2e} over 45 (q, geometry, k) points, bands 0-1 (tol 1e-8)")


def test_criterion_03_free_particle():
    worst = 0.0
    for q in (1.0, 1.5, 2.0, 2.5, 3.0):
        prob = ProblemSpec.from_params(q, 0.0, 1.5, 6.0)
        for k in brillouin_grid(prob.period, 25):
            worst = max(worst, abs(imaginary_time_solve(prob, k).energy - abs(k) ** q / 2))
    record(3, "free-particle exactness", worst <= 1e-10, f"max |dE| = {worst:.2e} (tol 1e-10)")


def test_criterion_04_effective_mass():
    geo = (0.5, 1.5, 7.0)
    qs = (2.0, 1.8, 1.6, 1.4, 1.2, 1.0)
    masses = [effective_mass(structure(q, geo).energies[0], structure(q, geo).k_grid).m_star
              for q in qs]
    decreasing = all(b < a for a, b in zip(masses, masses[1:]))
    at_one = masses[-1]
    in_window = abs(at_one - 0.15) <= 0.06
    table = ", ".join(f"{q}:{m:.4f}" for q, m in zip(qs, masses))
    record(4, "effective mass at q=1 and monotone decrease", decreasing and in_window,
           f"m*(q=1) = {at_one:.4f} (target 0.15 +/- 0.06, {'ok' if in_window else 'outside'}); "
           f"strictly decreasing: {decreasing}; m*(q) = {table}")


def _q_inv(geo):
    track = track_minima(structures(q_grid(2.0, 3.0, 0.025), geo))
    return inversion_order(track, geo[1] + geo[2])[1]


def test_criterion_05_inversion_thresholds():
    ref = _q_inv(REF)
    doubled = _q_inv((2 * REF[0], REF[1], REF[2]))
    ok_ref = 2.7 < ref < 3.0
    ok_dbl = abs(doubled - 2.3) <= 0.15
    record(5, "inversion completion orders", ok_ref and ok_dbl,
           f"reference {REF}: q_inv = {ref:.4f} (window (2.7, 3.0)); "
           f"V0 doubled: q_inv = {doubled:.4f} (window 2.3 +/- 0.15)")


@pytest.fixture(scope="module")
def default_sweep(tmp_path_factory):
    plan = load_config(ROOT / "configs" / "default_sweep.json")
    from dataclasses import replace
    plan = replace(plan, output_dir=tmp_path_factory.mktemp("default_sweep"))
    records = run_sweep(plan)
    entries = inversion_report(records)
    q_inv = {e.geometry: e.q_inv for e in entries}
    return q_inv, build_families(q_inv)


def _overlaps(mean, std, target, width):
    return mean - std <= target + width and mean + std >= target - width


@pytest.mark.extended
def test_criterion_06_scaling_exponents(default_sweep):
    _, families = default_sweep
    res = scaling_exponents(families)
    s = res.as_dict()
    signs = all(v.mean < 0 for v in s.values())
    ordering = abs(s["w"].mean) > abs(s["l"].mean) > abs(s["v0"].mean)
    targets = {"v0": (-0.28, 0.05), "l": (-0.35, 0.08), "w": (-0.49, 0.06)}
    overlap = {k: _overlaps(s[k].mean, s[k].std, *targets[k]) for k in s}
    detail = "; ".join(f"{k}: {s[k].mean:+.3f} +/- {s[k].std:.3f} "
                       f"({s[k].accepted} fits, overlap {'yes' if overlap[k] else 'no'})"
                       for k in ("v0", "l", "w"))
    record(6, "scaling exponents sign and ordering", signs and ordering,
           f"{detail}; hard: signs {signs}, ordering {ordering}; soft overlap all: "
           f"{all(overlap.values())}")


@pytest.mark.extended
def test_q_inv_non_increasing_in_v0(default_sweep):
    for fam in default_sweep[1]["v0"]:
        q = [qi for _, qi in fam]
        assert all(b <= a for a, b in zip(q, q[1:])), fam


def test_criterion_07_symmetry():
    notes = []
    sym = 0.0
    for q in (1.0, 1.5, 2.0, 2.5, 3.0):
        e = structure(q, REF, 2).energies
        sym = max(sym, float(np.max(np.abs(e - e[:, ::-1]))))
    notes.append(f"max |E(k)-E(-k)| = {sym:.1e}")
    gp = 0.0
    for q in (2.0, 2.5, 2.8):
        bs = structure(q, REF)
        model = fit_gpr(bs.k_grid, bs.energies[0], bs.zone_edge)
        ks = np.linspace(0, bs.zone_edge, 301)
        gp = max(gp, float(np.max(np.abs(model.predict(ks) - model.predict(-ks)))))
    notes.append(f"GPR asymmetry {gp:.1e}")
    curve = gap_curve(structures(q_grid(1.0, 3.0, 0.25), REF, 2))
    gaps_ok = bool(np.all(curve.indirect_gap <= curve.direct_gap))
    notes.append(f"indirect <= direct at all {len(curve.q_values)} q: {gaps_ok}")
    rise = -np.inf
    for q in (1.0, 2.0, 3.0):
        prob = ProblemSpec.from_params(q, *REF)
        for band in (0, 1):
            lower = solve_bands(prob, 0.2, band) if band else []
            trace = []
            imaginary_time_solve(prob, 0.2, band, lower, callback=lambda i, e, d: trace.append(e))
            rise = max(rise, float(np.max(np.diff(trace))))
    notes.append(f"largest per-step energy rise {rise:.1e}")
    ok = sym <= 1e-9 and gp <= 1e-10 and gaps_ok and rise <= 1e-12
    record(7, "symmetry suite", ok, "; ".join(notes))


def test_criterion_08_fit_recovery():
    errs = {}
    xs = np.linspace(0.3, 5.0, 15)
    fit = fit_power_law(xs, 2.7 * xs ** -0.42)
    errs["power law"] = max(abs(fit.amplitude - 2.7), abs(fit.exponent + 0.42))
    qs = np.linspace(2.05, 2.95, 10)
    fit = fit_shifted_power_law(qs, 0.31 * (qs - 2) ** 1.7)
    errs["shifted power law"] = max(abs(fit.amplitude - 0.31), abs(fit.exponent - 1.7))
    mq = np.linspace(1.0, 1.9, 10)
    rate, amp = mass_decay_fit(mq, 0.05 * np.exp(1.9 * mq))
    errs["exponential decay"] = max(abs(rate - 1.9), abs(amp - 0.05))
    kq = np.round(np.linspace(2.0, 3.0, 21), 10)
    kink = detect_kink(kq, np.where(kq < 2.6, 0.1 + 0.02 * (kq - 2), 0.112 - 0.03 * (kq - 2.6)))
    errs["kink"] = max(abs(kink.q_kink - 2.6), abs(kink.slope_before - 0.02),
                       abs(kink.slope_after + 0.03))
    rng = np.random.default_rng(11)
    noisy_x = np.linspace(1, 20, 60)
    noisy_y = 4.0 * noisy_x ** 0.8 * np.exp(1e-3 * rng.standard_normal(60))
    injected = {5, 22, 41}
    noisy_y[sorted(injected)] *= [30.0, 0.01, 80.0]
    removed = set(np.flatnonzero(~fit_power_law(noisy_x, noisy_y).inliers).tolist())
    worst = max(errs.values())
    ok = worst <= 1e-6 and removed == injected
    record(8, "fit recovery", ok,
           "; ".join(f"{k} {v:.1e}" for k, v in errs.items())
           + f"; outliers removed {sorted(removed)} vs injected {sorted(injected)}")


def test_criterion_09_determinism(tmp_path):
    base = {"q_values": [1.0, 1.7, 2.4, 3.0], "n_k": 9, "n_bands": 2, "seed": 5,
            "geometries": {"tuples": [[0.5, 1.5, 6.0], [1.0, 1.2, 5.5]]},
            "solver": {"n_points": 128}}
    payloads = {}
    for workers in (1, 4, 8):
        plan = parse_config(dict(base, output_dir=str(tmp_path / f"w{workers}")))
        payloads[workers] = [r.payload_bytes() for r in run_sweep(plan, workers=workers)]
    same = payloads[1] == payloads[4] == payloads[8]
    record(9, "determinism across workers", same,
           f"{len(payloads[1])} cells byte-identical for 1, 4, 8 workers: {same}")


def test_criterion_10_gap_kink_shift():
    ws = (5.0, 6.0, 7.0, 8.0)
    kinks = []
    for w in ws:
        curve = gap_curve(structures(q_grid(2.0, 3.0, 0.05), (0.5, 1.5, w), 2))
        kinks.append(detect_gap_kink(curve))
    detected = all(k.detected for k in kinks)
    locs = [k.q_kink for k in kinks]
    steps = np.diff(locs)
    monotone = bool(np.all(steps > 0) or np.all(steps < 0))
    record(10, "gap kink shifts with W", detected and monotone,
           "kink q: " + ", ".join(f"W={w}: {q:.2f}" for w, q in zip(ws, locs))
           + f"; all detected {detected}; monotone {monotone}")
