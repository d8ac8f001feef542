"""Bloch eigenstates of the fractional Hamiltonian ``|k + G|^q / 2 + V(x)``.

Two independent routes are provided:

* :func:`imaginary_time_solve` propagates a trial state in imaginary time on
  the real-space grid (FFT between real and reciprocal space) and extracts
  excited bands by deflation.
* :func:`planewave_diagonalize` builds the dense plane-wave Hamiltonian from
  the analytic Fourier coefficients of the potential and diagonalizes it.

Both work in the same truncated plane-wave set ``|n| <= n_g`` so that, once
converged, they agree to rounding error.  Products with the potential are
formed on a grid with ``n_points > 4 n_g`` points, which makes them free of
aliasing.
"""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import (DEFAULT_GRID_POINTS, BlochMomentum, PotentialSpec, RealSpaceGrid,
                   ReciprocalSet, as_wavevector, bandlimited_potential, build_grid,
                   potential_fourier)
from .exceptions import (ConfigurationError, ConvergenceError, NumericalError,
                         PreconditionError)
from .validation import as_1d_float, check_order

SCHEMES = ("exponential", "strang")


@dataclass(frozen=True)
class ProblemSpec:
    """Fractional order, potential and grid for one family of Bloch solves.

    ``n_g`` is the plane-wave half-width; it defaults to ``n_points // 8``
    (64 plane-wave orders either side of zero on the default 512-point grid).
    """

    q: float
    potential: PotentialSpec
    grid: RealSpaceGrid
    n_g: int = None

    def __post_init__(self):
        object.__setattr__(self, "q", check_order(self.q))
        if not np.isclose(self.grid.period, self.potential.period, rtol=1e-12, atol=0):
            raise ConfigurationError("grid and potential periods differ")
        n_g = self.grid.n_points // 8 if self.n_g is None else int(self.n_g)
        if n_g < 1 or 4 * n_g >= self.grid.n_points:
            raise ConfigurationError(
                f"n_g={n_g} needs 4*n_g < n_points={self.grid.n_points}")
        object.__setattr__(self, "n_g", n_g)

    @classmethod
    def from_params(cls, q, v0, l, w, n_points=DEFAULT_GRID_POINTS, n_g=None):
        spec = PotentialSpec(v0, l, w)
        return cls(q, spec, build_grid(spec, n_points), n_g)

    @property
    def period(self):
        return self.potential.period

    @property
    def reciprocal(self):
        return ReciprocalSet(self.period, self.n_g)


@dataclass(frozen=True)
class SolverSettings:
    """Imaginary-time controls.

    ``scheme="exponential"`` integrates the kinetic part exactly and treats
    the potential explicitly; its fixed point is the exact eigenstate for any
    step, so steps can be large.  ``scheme="strang"`` is the symmetric
    potential/kinetic/potential split; its fixed point carries an O(dtau^2)
    bias, so the step is reduced by ``dtau_decay`` each time the energy
    stagnates until ``dtau_min`` is reached.
    """

    dtau_initial: float = 1.0
    dtau_decay: float = 0.5
    dtau_min: float = 1e-4
    energy_tol: float = 1e-13
    max_iterations: int = 200_000
    deflation_tol: float = 1e-8
    scheme: str = "exponential"
    seed: int = 0

    def __post_init__(self):
        if not self.dtau_initial > 0:
            raise ConfigurationError("dtau_initial must be > 0")
        if not 0 < self.dtau_decay <= 1:
            raise ConfigurationError("dtau_decay must lie in (0, 1]")
        if not 0 < self.dtau_min <= self.dtau_initial:
            raise ConfigurationError("dtau_min must lie in (0, dtau_initial]")
        if not self.energy_tol > 0:
            raise ConfigurationError("energy_tol must be > 0")
        if int(self.max_iterations) < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}")

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class BlochState:
    k: BlochMomentum
    band: int
    energy: float
    amplitude: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    residual: float = 0.0
    iterations: int = 0
    dtau_final: float = float("nan")


# Plain numpy reductions rather than BLAS dot products: pairwise summation
# gives the same bits in every process regardless of BLAS threading.
def _inner(a, b):
    return np.sum(np.conj(a) * b)


def _norm(c):
    return np.sqrt(np.sum(c.real ** 2 + c.imag ** 2))


def kinetic_multiplier(q, k, gs):
    """Kinetic symbol ``|k + G|^q / 2`` for each reciprocal vector in ``gs``."""
    q = check_order(q)
    vectors = gs.vectors if isinstance(gs, ReciprocalSet) else np.asarray(gs, dtype=float)
    return 0.5 * np.abs(as_wavevector(k) + vectors) ** q


class _BlochOperator:
    """Plane-wave Hamiltonian at one (q, k), applied through FFTs."""

    def __init__(self, prob, k):
        self.prob = prob
        self.k = k
        n_points = prob.grid.n_points
        self.n_points = n_points
        self.sqrt_a = math.sqrt(prob.period)
        self.orders = prob.reciprocal.orders
        self.slots = self.orders % n_points
        # the grid starts at -a/2, which puts a (-1)^n phase on each order
        self.phase = np.where(self.orders % 2 == 0, 1.0, -1.0)
        self.kinetic = kinetic_multiplier(prob.q, k, prob.reciprocal)
        self.potential = bandlimited_potential(prob.potential, prob.grid, 2 * prob.n_g)

        full_orders = np.fft.fftfreq(n_points, 1.0 / n_points).round().astype(int)
        self.full_phase = np.where(full_orders % 2 == 0, 1.0, -1.0)
        self.full_kinetic = kinetic_multiplier(
            prob.q, k, 2 * np.pi * full_orders / prob.period)

    def to_grid(self, coeffs):
        buf = np.zeros(self.n_points, dtype=complex)
        buf[self.slots] = coeffs * self.phase
        return np.fft.ifft(buf) * (self.n_points / self.sqrt_a)

    def full_spectrum(self, field_values):
        """All grid Fourier coefficients, in FFT order, normalized like ``coeffs``."""
        return np.fft.fft(field_values) * (self.sqrt_a / self.n_points) * self.full_phase

    def from_grid(self, field_values):
        return self.full_spectrum(field_values)[self.slots]

    def apply_potential(self, coeffs):
        return self.from_grid(self.potential * self.to_grid(coeffs))

    def rayleigh(self, coeffs, v_coeffs):
        kin = np.sum(self.kinetic * np.abs(coeffs) ** 2)
        pot = _inner(coeffs, v_coeffs).real
        return float(kin + pot)


def _initial_coefficients(op, band, seed):
    # start from the band-th slowest plane wave plus a small seeded perturbation
    rank = np.lexsort((np.abs(op.orders), op.kinetic))
    c = np.zeros(len(op.orders), dtype=complex)
    c[rank[band]] = 1.0
    rng = np.random.default_rng([seed, band])
    c += 1e-3 * rng.standard_normal(len(c))
    return c


def _deflate(c, lower):
    for vec in lower:
        c = c - _inner(vec, c) * vec
    return c


def _check_lower_states(op, band, lower_states, k):
    if band < 0:
        raise PreconditionError("band index must be >= 0")
    found = {s.band: s for s in lower_states}
    missing = [b for b in range(band) if b not in found]
    if missing:
        raise PreconditionError(f"band {band} needs converged lower bands {missing}")
    vecs = []
    for b in range(band):
        s = found[b]
        if abs(s.k.k - k) > 1e-14 or len(s.coefficients) != len(op.orders):
            raise PreconditionError(f"lower state for band {b} was solved for a different problem")
        vecs.append(s.coefficients)
    return vecs


def imaginary_time_solve(prob, k, band=0, lower_states=(), settings=None, callback=None):
    """Lowest eigenstate at momentum ``k`` orthogonal to ``lower_states``.

    Each step propagates the state in imaginary time, projects out the lower
    bands and renormalizes.  Iteration stops once the relative energy change
    ``|E_j - E_{j-1}| / max(|E_j|, 1)`` drops below ``settings.energy_tol``.

    ``callback(iteration, energy, dtau)`` is invoked after every accepted step.
    """
    settings = settings or SolverSettings()
    momentum = k if isinstance(k, BlochMomentum) else BlochMomentum.in_zone(k, prob.period)
    kval = momentum.k
    op = _BlochOperator(prob, kval)
    lower = _check_lower_states(op, band, lower_states, kval)

    c = _deflate(_initial_coefficients(op, band, settings.seed), lower)
    c /= _norm(c)
    vc = op.apply_potential(c)
    energy = op.rayleigh(c, vc)

    if settings.scheme == "exponential":
        c, energy, change, it, dtau = _run_exponential(op, c, vc, energy, lower, settings, callback)
    else:
        c, energy, change, it, dtau = _run_strang(op, c, energy, lower, settings, callback)

    overlaps = [abs(_inner(vec, c)) for vec in lower]
    if overlaps and max(overlaps) > settings.deflation_tol:
        raise NumericalError(f"deflation lost orthogonality: overlap {max(overlaps):.3e}")
    return BlochState(k=momentum, band=band, energy=energy, amplitude=op.to_grid(c),
                      coefficients=c, residual=change, iterations=it, dtau_final=dtau)


def _exponential_factors(op, dtau):
    decay = np.exp(-dtau * op.kinetic)
    # (1 - e^{-dtau T}) / T, with its dtau limit where T = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(op.kinetic > 0, -np.expm1(-dtau * op.kinetic) / op.kinetic, dtau)
    return decay, weight


def _run_exponential(op, c, vc, energy, lower, settings, callback):
    dtau = settings.dtau_initial
    decay, weight = _exponential_factors(op, dtau)
    change = np.inf
    for it in range(1, settings.max_iterations + 1):
        trial = decay * c - weight * (vc - energy * c)
        trial = _deflate(trial, lower)
        trial /= _norm(trial)
        v_trial = op.apply_potential(trial)
        e_trial = op.rayleigh(trial, v_trial)
        scale = max(abs(e_trial), 1.0)
        if e_trial - energy > settings.energy_tol * scale and dtau > settings.dtau_min:
            # explicit potential step overshot; retry with a smaller step
            dtau = max(dtau * settings.dtau_decay, settings.dtau_min)
            decay, weight = _exponential_factors(op, dtau)
            continue
        change = abs(e_trial - energy) / scale
        c, vc, energy = trial, v_trial, e_trial
        if callback is not None:
            callback(it, energy, dtau)
        if change < settings.energy_tol:
            return c, energy, change, it, dtau
    raise ConvergenceError(
        f"imaginary-time solve did not converge in {settings.max_iterations} steps "
        f"(last relative change {change:.3e})", residual=change, iterations=settings.max_iterations)


def _run_strang(op, c, energy, lower, settings, callback):
    dtau = settings.dtau_initial
    change = np.inf
    for it in range(1, settings.max_iterations + 1):
        half_v = np.exp(-0.5 * dtau * op.potential)
        u = half_v * op.to_grid(c)
        spec = op.full_spectrum(u) * np.exp(-dtau * op.full_kinetic)
        u = np.fft.ifft(spec * op.full_phase) * (op.n_points / op.sqrt_a)
        c = op.from_grid(half_v * u)
        c = _deflate(c, lower)
        c /= _norm(c)
        new_energy = op.rayleigh(c, op.apply_potential(c))
        change = abs(new_energy - energy) / max(abs(new_energy), 1.0)
        energy = new_energy
        if callback is not None:
            callback(it, energy, dtau)
        if change < settings.energy_tol:
            if dtau <= settings.dtau_min:
                return c, energy, change, it, dtau
            dtau = max(dtau * settings.dtau_decay, settings.dtau_min)
    raise ConvergenceError(
        f"Strang imaginary-time solve did not converge in {settings.max_iterations} steps "
        f"(last relative change {change:.3e}, dtau {dtau:.1e})",
        residual=change, iterations=settings.max_iterations)


def solve_bands(prob, k, n_bands, settings=None):
    """Bands ``0 .. n_bands-1`` at one momentum, each deflated against the previous."""
    states = []
    for band in range(n_bands):
        states.append(imaginary_time_solve(prob, k, band, states, settings))
    return states


def planewave_diagonalize(prob, k, n_g=None, n_bands=2):
    """Lowest ``n_bands`` eigenvalues of the dense plane-wave Hamiltonian.

    Matrix elements are ``|k + G_m|^q / 2 * delta_mn + V(G_m - G_n)`` with the
    analytic Fourier coefficients of the rectangular potential.  The matrix is
    real symmetric because the barrier is centred.
    """
    n_g = prob.n_g if n_g is None else int(n_g)
    if n_g < 8:
        raise PreconditionError("n_g must be >= 8")
    if not 1 <= n_bands <= 2 * n_g:
        raise PreconditionError("n_bands must lie in [1, 2*n_g]")
    gs = ReciprocalSet(prob.period, n_g)
    vectors = gs.vectors
    h = potential_fourier(prob.potential, vectors[:, None] - vectors[None, :])
    h[np.diag_indices_from(h)] += kinetic_multiplier(prob.q, k, gs)
    try:
        vals = scipy.linalg.eigh(h, eigvals_only=True, subset_by_index=[0, n_bands - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigen-decomposition failed: {exc}") from exc
    return vals


def energy_of(prob, amplitude, k):
    """Energy expectation of a normalized cell-periodic field ``u_k``.

    The kinetic part is summed over every grid Fourier mode with the shifted
    symbol, the potential part is a real-space quadrature against the
    band-limited potential used by the solver.
    """
    amplitude = np.asarray(amplitude, dtype=complex)
    grid = prob.grid
    if amplitude.shape != (grid.n_points,):
        raise PreconditionError("amplitude does not match the grid")
    density = np.abs(amplitude) ** 2
    norm = density.sum() * grid.spacing
    if abs(norm - 1.0) > 1e-6:
        raise PreconditionError(f"amplitude is not normalized (norm {norm:.8f})")
    op = _BlochOperator(prob, as_wavevector(k))
    kinetic = np.sum(op.full_kinetic * np.abs(op.full_spectrum(amplitude)) ** 2)
    potential = np.sum(op.potential * density) * grid.spacing
    return float(kinetic + potential)


class BlochSolver(TransformerMixin, BaseEstimator):
    """Estimator wrapper mapping momenta to band energies.

    ``fit`` only validates parameters and builds the problem; ``transform``
    takes momenta (shape ``(n,)`` or ``(n, 1)``) and returns energies with
    shape ``(n, n_bands)``.
    """

    def __init__(self, q=2.0, v0=0.5, l=1.5, w=6.0, n_points=DEFAULT_GRID_POINTS,
                 n_bands=2, settings=None):
        self.q = q
        self.v0 = v0
        self.l = l
        self.w = w
        self.n_points = n_points
        self.n_bands = n_bands
        self.settings = settings

    def fit(self, X=None, y=None):
        self.problem_ = ProblemSpec.from_params(self.q, self.v0, self.l, self.w, self.n_points)
        if int(self.n_bands) < 1:
            raise ConfigurationError("n_bands must be >= 1")
        return self

    def transform(self, X):
        check_is_fitted(self, "problem_")
        ks = as_1d_float(X, "k")
        out = np.empty((len(ks), self.n_bands))
        for i, kval in enumerate(ks):
            states = solve_bands(self.problem_, kval, self.n_bands, self.settings)
            out[i] = [s.energy for s in states]
        return out
