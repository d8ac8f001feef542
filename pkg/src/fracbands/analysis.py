"""Power-law and exponential fits, inversion-completion estimates, gap kinks."""
from dataclasses import dataclass, field
import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .bands import Inversion
from .exceptions import DegenerateFitError, DomainError, InsufficientDataError, PreconditionError
from .validation import as_1d_float, check_strictly_positive

Z_THRESHOLD = 3.0
MIN_POINTS = 3


@dataclass(frozen=True, eq=False)
class PowerLawFit:
    """``y = amplitude * (x - shift)**exponent`` fitted in log-log space."""

    amplitude: float
    exponent: float
    r_squared: float
    residual_z: np.ndarray = field(repr=False)
    n_used: int
    inliers: np.ndarray = field(repr=False)
    shift: float = 0.0

    def __call__(self, x):
        return self.amplitude * (np.asarray(x, dtype=float) - self.shift) ** self.exponent


def _ols(x, y):
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise DegenerateFitError("all abscissae coincide")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    return ym - slope * xm, slope


def _zscores(residuals):
    std = residuals.std()
    if std == 0:
        return np.zeros_like(residuals)
    return (residuals - residuals.mean()) / std


def _r_squared(y, fitted):
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        return 0.0
    return float(np.clip(1.0 - np.sum((y - fitted) ** 2) / ss_tot, 0.0, 1.0))


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Log-log least squares with iterative z-score outlier rejection.

    Points whose residual z-score exceeds ``z_threshold`` are dropped and the
    line refitted until no point is dropped.  ``shift`` fits
    ``y = C (x - shift)**b`` instead of ``y = C x**b``.
    """

    def __init__(self, z_threshold=Z_THRESHOLD, shift=0.0):
        self.z_threshold = z_threshold
        self.shift = shift

    def fit(self, X, y):
        x = as_1d_float(X, "x") - self.shift
        y = as_1d_float(y, "y")
        if len(x) != len(y):
            raise PreconditionError("x and y lengths differ")
        if len(x) < MIN_POINTS:
            raise DegenerateFitError(f"need at least {MIN_POINTS} points, got {len(x)}")
        lx = np.log(check_strictly_positive(x, "x" if not self.shift else "x - shift"))
        ly = np.log(check_strictly_positive(y, "y"))
        keep = np.ones(len(x), dtype=bool)
        while True:
            if keep.sum() < MIN_POINTS:
                raise DegenerateFitError("fewer than 3 points survive outlier rejection")
            intercept, slope = _ols(lx[keep], ly[keep])
            z = np.zeros(len(x))
            z[keep] = _zscores(ly[keep] - (intercept + slope * lx[keep]))
            drop = keep & (np.abs(z) > self.z_threshold)
            if not drop.any():
                break
            keep &= ~drop
        self.intercept_, self.exponent_ = float(intercept), float(slope)
        self.amplitude_ = math.exp(self.intercept_)
        self.inlier_mask_ = keep
        self.residual_z_ = z[keep]
        self.r_squared_ = _r_squared(ly[keep], intercept + slope * lx[keep])
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        x = as_1d_float(X, "x") - self.shift
        return self.amplitude_ * x ** self.exponent_

    def result(self):
        check_is_fitted(self, "exponent_")
        return PowerLawFit(amplitude=self.amplitude_, exponent=self.exponent_,
                           r_squared=self.r_squared_, residual_z=self.residual_z_,
                           n_used=int(self.inlier_mask_.sum()), inliers=self.inlier_mask_,
                           shift=float(self.shift))


def fit_power_law(xs, ys):
    return PowerLawRegressor().fit(xs, ys).result()


def fit_shifted_power_law(qs, k_mins, onset=2.0):
    """Fit ``k_min = C (q - onset)**beta``; every q must exceed ``onset``."""
    qs = as_1d_float(qs, "q")
    if np.any(qs <= onset):
        raise DomainError(f"all fractional orders must exceed {onset}")
    return PowerLawRegressor(shift=onset).fit(qs, k_mins).result()


def inversion_completion(fit, period):
    """Order at which the fitted minimum reaches the zone edge ``pi/a``."""
    if not (fit.amplitude > 0 and fit.exponent > 0 and math.isfinite(fit.exponent)):
        raise DomainError("need a positive amplitude and exponent to invert the fit")
    return fit.shift + (math.pi / (period * fit.amplitude)) ** (1.0 / fit.exponent)


def inversion_order(track, period, onset=2.0):
    """Shifted power law through the partially inverted points of a minima track.

    Returns ``(fit, q_inv)``.  Points with ``k_min = 0`` (not inverted) or
    ``k_min = pi/a`` (fully inverted) carry no position information and are
    left out.
    """
    edge = math.pi / period
    k = np.asarray(track.k_min, dtype=float)
    q = np.asarray(track.q_values, dtype=float)
    partial = (k > 0) & (k < edge) & (q > onset)
    if partial.sum() < MIN_POINTS:
        raise DegenerateFitError(
            f"only {int(partial.sum())} partially inverted points; need {MIN_POINTS}")
    fit = fit_shifted_power_law(q[partial], k[partial], onset)
    return fit, inversion_completion(fit, period)


def classify_track(track):
    """Inversion class for each point of a minima track."""
    edge = track.zone_edge
    return [Inversion.NOT_INVERTED if k == 0 else
            Inversion.FULLY_INVERTED if k >= edge else Inversion.PARTIALLY_INVERTED
            for k in track.k_min]


@dataclass(frozen=True)
class ExponentSummary:
    mean: float
    std: float
    accepted: int
    rejected: int
    exponents: tuple = ()


@dataclass(frozen=True)
class ScalingResult:
    exponent_v0: ExponentSummary
    exponent_l: ExponentSummary
    exponent_w: ExponentSummary

    def as_dict(self):
        return {"v0": self.exponent_v0, "l": self.exponent_l, "w": self.exponent_w}


def _accept(fit, r2_low=0.9):
    # R^2 = 1 is accepted: exact fits on clean data legitimately reach it
    return r2_low < fit.r_squared <= 1.0


def scaling_exponents(families):
    """Mean and spread of power-law exponents of ``q_inv`` against each parameter.

    ``families`` maps ``"v0"``, ``"l"`` and ``"w"`` to lists of families; a
    family is a sequence of ``(parameter value, q_inv)`` pairs in which only
    that parameter varies.  Fits with ``R^2 <= 0.9`` are rejected.
    """
    summaries = {}
    for name in ("v0", "l", "w"):
        fams = families.get(name, [])
        if len(fams) < 2:
            raise PreconditionError(f"need at least two families for {name}, got {len(fams)}")
        exps, rejected = [], 0
        for fam in fams:
            x, y = np.asarray(fam, dtype=float).T
            try:
                fit = fit_power_law(x, y)
            except DegenerateFitError:
                rejected += 1
                continue
            if _accept(fit):
                exps.append(fit.exponent)
            else:
                rejected += 1
        if len(exps) < 2:
            raise InsufficientDataError(
                f"only {len(exps)} accepted fits for parameter {name}; need 2")
        summaries[name] = ExponentSummary(mean=float(np.mean(exps)), std=float(np.std(exps, ddof=1)),
                                          accepted=len(exps), rejected=rejected,
                                          exponents=tuple(exps))
    return ScalingResult(summaries["v0"], summaries["l"], summaries["w"])


@dataclass(frozen=True)
class KinkResult:
    q_kink: float
    slope_before: float
    slope_after: float
    sse: float
    detected: bool

    @property
    def slope_change(self):
        return self.slope_after - self.slope_before


def detect_kink(q_values, gaps, rel_threshold=0.1):
    """Best continuous two-segment linear fit to ``gaps(q)``.

    The breakpoint is scanned over interior grid points.  ``detected`` is
    False when the slope changes by less than ``rel_threshold`` of the
    pre-break slope magnitude.
    """
    q = as_1d_float(q_values, "q")
    g = as_1d_float(gaps, "gaps")
    if len(q) < 7 or len(g) != len(q):
        raise PreconditionError("detect_kink needs at least 7 (q, gap) samples")
    steps = np.diff(q)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-6, atol=0):
        raise PreconditionError("q samples must be uniformly spaced and increasing")
    best = None
    for i in range(1, len(q) - 1):
        hinge = np.maximum(q - q[i], 0.0)
        design = np.column_stack([np.ones_like(q), q - q[i], hinge])
        coef, *_ = np.linalg.lstsq(design, g, rcond=None)
        sse = float(np.sum((design @ coef - g) ** 2))
        if best is None or sse < best[0] - 1e-15 * max(1.0, sse):
            best = (sse, i, coef)
    sse, i, coef = best
    before, change = float(coef[1]), float(coef[2])
    detected = abs(change) >= rel_threshold * abs(before) and abs(change) > 0
    return KinkResult(q_kink=float(q[i]), slope_before=before, slope_after=before + change,
                      sse=sse, detected=bool(detected))


def detect_gap_kink(curve, which="indirect", rel_threshold=0.1):
    gaps = curve.indirect_gap if which == "indirect" else curve.direct_gap
    return detect_kink(curve.q_values, gaps, rel_threshold)


def mass_decay_fit(qs, m_stars):
    """Fit ``m* = A exp(r q)``; returns ``(rate, amplitude)``."""
    qs = as_1d_float(qs, "q")
    m = as_1d_float(m_stars, "m_star")
    if len(m) != len(qs):
        raise PreconditionError("q and m_star lengths differ")
    if np.any(m <= 0) or not np.all(np.isfinite(m)):
        raise DomainError("effective masses must be positive")
    if np.any((qs < 1.0) | (qs >= 2.0)):
        raise DomainError("mass decay fit applies to q in [1, 2)")
    intercept, rate = _ols(qs, np.log(m))
    return float(rate), float(math.exp(intercept))
