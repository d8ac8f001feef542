"""Units, periodic rectangular potentials, grids and reciprocal vectors.

Conventions used everywhere in the package:

* hbar = m = C_q = 1, so the kinetic symbol is ``|k|**q / 2``.
* One unit cell spans ``[-a/2, a/2)`` with the barrier centred at ``x = 0``;
  the Fourier coefficients of the potential are then real and even.
"""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .validation import check_grid_size

DEFAULT_GRID_POINTS = 512


@dataclass(frozen=True)
class UnitsConvention:
    hbar: float = 1.0
    mass: float = 1.0
    c_q: float = 1.0

    def __post_init__(self):
        if (self.hbar, self.mass, self.c_q) != (1.0, 1.0, 1.0):
            raise ConfigurationError("unit constants are fixed to 1")


UNITS = UnitsConvention()


@dataclass(frozen=True)
class PotentialSpec:
    """Periodic array of rectangular barriers.

    Parameters
    ----------
    v0 : float
        Barrier height, ``v0 >= 0``.
    l : float
        Barrier width, ``l > 0``.
    w : float
        Well width, ``w > 0``.
    """

    v0: float
    l: float
    w: float

    def __post_init__(self):
        for name in ("v0", "l", "w"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ConfigurationError(f"{name} must be finite")
            object.__setattr__(self, name, float(value))
        if self.v0 < 0:
            raise ConfigurationError(f"v0 must be >= 0, got {self.v0}")
        if self.l <= 0 or self.w <= 0:
            raise ConfigurationError(f"l and w must be > 0, got l={self.l}, w={self.w}")

    @property
    def period(self):
        return self.l + self.w

    @property
    def zone_edge(self):
        """Brillouin-zone boundary ``pi / a``."""
        return np.pi / self.period

    def __call__(self, x):
        """Evaluate V(x) for arbitrary x, folding into the central cell."""
        x = np.asarray(x, dtype=float)
        a = self.period
        folded = x - a * np.floor(x / a + 0.5)
        return np.where(np.abs(folded) <= self.l / 2, self.v0, 0.0)


@dataclass(frozen=True)
class RealSpaceGrid:
    period: float
    n_points: int
    coordinates: np.ndarray = field(repr=False, compare=False)

    @property
    def spacing(self):
        return self.period / self.n_points


@dataclass(frozen=True)
class BlochMomentum:
    k: float
    index: int = 0

    @classmethod
    def in_zone(cls, k, period, index=0):
        if abs(k) > np.pi / period + 1e-12:
            raise DomainError(f"k={k} outside the first Brillouin zone of period {period}")
        return cls(float(k), int(index))


@dataclass(frozen=True)
class ReciprocalSet:
    """Reciprocal vectors ``2 pi n / a`` for ``n = -n_max .. n_max``."""

    period: float
    n_max: int

    @property
    def orders(self):
        return np.arange(-self.n_max, self.n_max + 1)

    @property
    def vectors(self):
        return 2 * np.pi * self.orders / self.period

    def __len__(self):
        return 2 * self.n_max + 1


def as_wavevector(k):
    """Accept either a float or a :class:`BlochMomentum`."""
    return float(k.k) if isinstance(k, BlochMomentum) else float(k)


def build_grid(spec, n_points=DEFAULT_GRID_POINTS):
    """Uniform grid of ``n_points`` samples over one cell, starting at -a/2."""
    n_points = check_grid_size(n_points)
    a = spec.period
    coords = -a / 2 + (a / n_points) * np.arange(n_points)
    coords.setflags(write=False)
    return RealSpaceGrid(period=a, n_points=n_points, coordinates=coords)


def _check_grid_matches(spec, grid):
    if not np.isclose(grid.period, spec.period, rtol=0, atol=1e-12 * spec.period):
        raise ConfigurationError(
            f"grid period {grid.period} does not match potential period {spec.period}")


def sample_potential(spec, grid):
    """Sample the rectangular potential; edge points belong to the barrier."""
    _check_grid_matches(spec, grid)
    return spec(grid.coordinates)


def potential_fourier(spec, g):
    """Fourier coefficient ``(1/a) * int V(x) exp(-i g x) dx`` over one cell.

    Real and even in ``g`` because the barrier is centred at the origin.
    ``g`` may be a scalar or an array of reciprocal vectors.
    """
    g = np.asarray(g, dtype=float)
    # sinc(x) = sin(pi x)/(pi x) covers g = 0 without a branch
    out = spec.v0 * spec.l / spec.period * np.sinc(g * spec.l / (2 * np.pi))
    return float(out) if out.ndim == 0 else out


def reciprocal_set(spec, n_max):
    return ReciprocalSet(period=spec.period, n_max=int(n_max))


def bandlimited_potential(spec, grid, n_harmonics):
    """Truncated Fourier series of V with harmonics ``|n| <= n_harmonics``."""
    _check_grid_matches(spec, grid)
    if n_harmonics >= grid.n_points // 2:
        raise ConfigurationError("n_harmonics must stay below the grid Nyquist index")
    n = np.arange(1, n_harmonics + 1)
    g = 2 * np.pi * n / spec.period
    coeff = potential_fourier(spec, g)
    series = np.cos(np.outer(grid.coordinates, g)) @ (2 * coeff)
    return potential_fourier(spec, 0.0) + series


def brillouin_grid(period, n_k):
    """``n_k`` uniform momenta spanning ``[-pi/a, pi/a]`` inclusive."""
    edge = np.pi / period
    ks = np.linspace(-edge, edge, n_k)
    # force exact symmetry so E(k) = E(-k) comparisons are meaningful
    ks = 0.5 * (ks - ks[::-1])
    return ks
