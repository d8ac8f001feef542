"""Dispersions over the Brillouin zone and the quantities derived from them."""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import BlochMomentum, PotentialSpec, brillouin_grid
from .exceptions import ConvergenceError, PreconditionError
from .solver import SolverSettings, imaginary_time_solve

DEFAULT_NK = 25


@dataclass(frozen=True, eq=False)
class BandStructure:
    """Energies ``E_n(k)``; ``energies`` has shape ``(n_bands, n_k)``."""

    q: float
    potential: PotentialSpec
    k_grid: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    iterations: np.ndarray = field(default=None, repr=False)
    residuals: np.ndarray = field(default=None, repr=False)
    n_points: int = 0

    @property
    def n_bands(self):
        return self.energies.shape[0]

    @property
    def zone_edge(self):
        return self.potential.zone_edge

    @property
    def geometry(self):
        p = self.potential
        return (p.v0, p.l, p.w)

    def band(self, n):
        return self.energies[n]


class Inversion(str, Enum):
    NOT_INVERTED = "not_inverted"
    PARTIALLY_INVERTED = "partially_inverted"
    FULLY_INVERTED = "fully_inverted"


@dataclass(frozen=True)
class InversionState:
    classification: Inversion
    k_min: float


@dataclass(frozen=True)
class EffectiveMassResult:
    k0: float
    delta_k: float
    curvature: float
    m_star: float
    # curvature <= 0: k0 is not a minimum, so m_star is not a band-bottom mass
    flagged: bool = False


@dataclass(frozen=True)
class GapDirectness:
    direct: bool
    k_valence_max: float
    k_conduction_min: float

    @property
    def label(self):
        return "Direct" if self.direct else "Indirect"


@dataclass(frozen=True, eq=False)
class GapCurve:
    q_values: np.ndarray
    direct_gap: np.ndarray
    indirect_gap: np.ndarray
    directness: list


def compute_band_structure(prob, n_k=DEFAULT_NK, n_bands=2, settings=None):
    """Solve every (k, band) on a uniform ``n_k``-point zone grid.

    Raises :class:`ConvergenceError` naming every failed (k, band) pair after
    attempting the whole grid.
    """
    if n_k < 3 or n_k % 2 == 0:
        raise PreconditionError("n_k must be odd and >= 3 so that k = 0 is sampled")
    if n_bands < 1:
        raise PreconditionError("n_bands must be >= 1")
    settings = settings or SolverSettings()
    ks = brillouin_grid(prob.period, n_k)
    energies = np.full((n_bands, n_k), np.nan)
    iterations = np.zeros((n_bands, n_k), dtype=int)
    residuals = np.full((n_bands, n_k), np.nan)
    failures = []
    for i, kval in enumerate(ks):
        momentum = BlochMomentum(float(kval), i)
        states = []
        for band in range(n_bands):
            try:
                state = imaginary_time_solve(prob, momentum, band, states, settings)
            except ConvergenceError as exc:
                failures.extend((float(kval), b, exc.residual) for b in range(band, n_bands))
                break
            states.append(state)
            energies[band, i] = state.energy
            iterations[band, i] = state.iterations
            residuals[band, i] = state.residual
    if failures:
        pairs = ", ".join(f"(k={k:.6g}, band={b})" for k, b, _ in failures)
        worst = max(r for _, _, r in failures)
        raise ConvergenceError(f"band structure failed at {pairs}", residual=worst)
    # deflation already orders the bands; sorting only removes rounding swaps
    energies = np.sort(energies, axis=0)
    return BandStructure(q=prob.q, potential=prob.potential, k_grid=ks, energies=energies,
                         iterations=iterations, residuals=residuals,
                         n_points=prob.grid.n_points)


def _grid_index(k_grid, k0):
    k_grid = np.asarray(k_grid, dtype=float)
    spacing = np.min(np.diff(k_grid))
    i = int(np.argmin(np.abs(k_grid - k0)))
    if abs(k_grid[i] - k0) > 1e-9 * max(spacing, 1.0):
        raise PreconditionError(f"k0={k0} is not on the grid")
    return i


def effective_mass(band, k_grid, k0=0.0):
    """Central-difference curvature at ``k0`` and the mass ``1/curvature``.

    The step is the grid spacing, so for cusp-like bands (q < 2) the result
    depends on the grid; ``delta_k`` is recorded for that reason.
    """
    band = np.asarray(band, dtype=float)
    k_grid = np.asarray(k_grid, dtype=float)
    i = _grid_index(k_grid, k0)
    if i == 0 or i == len(k_grid) - 1:
        raise PreconditionError("k0 needs a grid neighbour on both sides")
    left, right = k_grid[i] - k_grid[i - 1], k_grid[i + 1] - k_grid[i]
    if not np.isclose(left, right, rtol=1e-9, atol=0):
        raise PreconditionError("central difference needs a uniform grid around k0")
    dk = 0.5 * (left + right)
    curvature = (band[i + 1] - 2 * band[i] + band[i - 1]) / dk ** 2
    m_star = 1.0 / curvature if curvature != 0 else np.inf
    return EffectiveMassResult(k0=float(k_grid[i]), delta_k=float(dk), curvature=float(curvature),
                               m_star=float(m_star), flagged=bool(curvature <= 0))


def _fold(values, k_grid):
    """Average E(k) and E(-k) onto the non-negative half of a symmetric grid."""
    values = np.asarray(values, dtype=float)
    k_grid = np.asarray(k_grid, dtype=float)
    n = len(k_grid)
    if n % 2 == 0 or not np.allclose(k_grid, -k_grid[::-1], rtol=0, atol=1e-12):
        raise PreconditionError("need a symmetric k-grid containing k = 0")
    mid = n // 2
    return k_grid[mid:], 0.5 * (values[mid:] + values[mid::-1])


def classify_inversion(band, k_grid, tol=1e-10):
    """Locate the ground-band minimum on ``[0, pi/a]`` and classify it.

    Inversion is only declared when some ``k > 0`` lies below ``E(0)`` by more
    than ``tol``; among equal minima the smallest ``|k|`` wins.
    """
    ks, e = _fold(band, k_grid)
    j = int(np.argmin(e))
    if e[j] >= e[0] - tol:
        return InversionState(Inversion.NOT_INVERTED, 0.0)
    if j == len(ks) - 1:
        return InversionState(Inversion.FULLY_INVERTED, float(ks[j]))
    return InversionState(Inversion.PARTIALLY_INVERTED, float(ks[j]))


def gap_curve(structures):
    """Direct and indirect gaps between bands 0 and 1 for each structure.

    The gap is direct when the ground-band maximum and the first-excited-band
    minimum sit within one grid spacing of each other (compared on
    ``[0, pi/a]``).
    """
    structures = list(structures)
    if not structures:
        raise PreconditionError("no band structures given")
    geometry = structures[0].geometry
    qs = np.array([s.q for s in structures])
    if any(s.geometry != geometry for s in structures):
        raise PreconditionError("gap_curve needs one geometry across all structures")
    if np.any(np.diff(qs) <= 0):
        raise PreconditionError("q values must be strictly increasing")
    direct, indirect, kinds = [], [], []
    for s in structures:
        if s.n_bands < 2:
            raise PreconditionError("gap_curve needs at least two bands")
        e0, e1 = s.energies[0], s.energies[1]
        direct.append(float(np.min(e1 - e0)))
        indirect.append(float(np.min(e1) - np.max(e0)))
        ks, f0 = _fold(e0, s.k_grid)
        _, f1 = _fold(e1, s.k_grid)
        kv, kc = ks[int(np.argmax(f0))], ks[int(np.argmin(f1))]
        spacing = ks[1] - ks[0]
        kinds.append(GapDirectness(bool(abs(kv - kc) <= spacing * (1 + 1e-9)), float(kv), float(kc)))
    return GapCurve(q_values=qs, direct_gap=np.array(direct), indirect_gap=np.array(indirect),
                    directness=kinds)
