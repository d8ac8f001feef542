"""Aggregate stored records into inversion, scaling, mass and gap reports."""
from collections import defaultdict
from dataclasses import dataclass
import math

import numpy as np

from ..analysis import detect_gap_kink, inversion_order, mass_decay_fit, scaling_exponents
from ..bands import effective_mass, gap_curve
from ..exceptions import FracBandsError, InsufficientDataError
from ..gpr import track_minima

PARAMS = ("v0", "l", "w")


def group_structures(records):
    """Band structures of successful records keyed by geometry, sorted by q."""
    groups = defaultdict(list)
    for r in records:
        if r.ok:
            groups[tuple(r.geometry)].append(r.band_structure())
    return {geo: sorted(items, key=lambda s: s.q) for geo, items in sorted(groups.items())}


@dataclass(frozen=True)
class InversionEntry:
    geometry: tuple
    track: object
    q_inv: float
    error: str = ""


def inversion_report(records, resolution=301):
    out = []
    for geo, structures in group_structures(records).items():
        track = track_minima(structures, resolution)
        try:
            _, q_inv = inversion_order(track, geo[1] + geo[2])
            error = ""
        except FracBandsError as exc:
            q_inv, error = math.nan, str(exc)
        out.append(InversionEntry(geo, track, q_inv, error))
    return out


def build_families(q_inv_by_geometry, min_size=3):
    """One-parameter families: geometries that differ in a single parameter.

    Returns ``{"v0": [...], "l": [...], "w": [...]}`` where each family is a
    sorted list of ``(parameter value, q_inv)`` pairs with at least
    ``min_size`` distinct parameter values.
    """
    families = {}
    for i, name in enumerate(PARAMS):
        buckets = defaultdict(dict)
        for geo, q_inv in q_inv_by_geometry.items():
            if not math.isfinite(q_inv):
                continue
            rest = tuple(v for j, v in enumerate(geo) if j != i)
            buckets[rest][geo[i]] = q_inv
        families[name] = [sorted(b.items()) for _, b in sorted(buckets.items())
                          if len(b) >= min_size]
    return families


def scaling_report(records, resolution=301):
    entries = inversion_report(records, resolution)
    families = build_families({e.geometry: e.q_inv for e in entries})
    return scaling_exponents(families), families, entries


@dataclass(frozen=True)
class MassEntry:
    geometry: tuple
    q_values: np.ndarray
    m_star: np.ndarray
    delta_k: float
    flagged: np.ndarray
    rate: float
    amplitude: float


def mass_report(records, k0=0.0):
    out = []
    for geo, structures in group_structures(records).items():
        masses = [effective_mass(s.energies[0], s.k_grid, k0) for s in structures]
        qs = np.array([s.q for s in structures])
        m = np.array([r.m_star for r in masses])
        flagged = np.array([r.flagged for r in masses])
        sel = (qs < 2.0) & ~flagged
        rate = amplitude = math.nan
        if sel.sum() >= 2:
            rate, amplitude = mass_decay_fit(qs[sel], m[sel])
        out.append(MassEntry(geo, qs, m, masses[0].delta_k, flagged, rate, amplitude))
    return out


@dataclass(frozen=True)
class GapEntry:
    geometry: tuple
    curve: object
    kink: object


def gap_report(records):
    out = []
    for geo, structures in group_structures(records).items():
        if any(s.n_bands < 2 for s in structures):
            continue
        curve = gap_curve(structures)
        try:
            kink = detect_gap_kink(curve)
        except FracBandsError:
            kink = None
        out.append(GapEntry(geo, curve, kink))
    if not out:
        raise InsufficientDataError("no geometry has records with two or more bands")
    return out
