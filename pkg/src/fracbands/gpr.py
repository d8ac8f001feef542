"""Gaussian-process interpolation of a sampled band and minimum search.

The regressor uses a squared-exponential kernel with an almost noiseless
likelihood, so it interpolates the solver energies.  Training data are
mirrored ``k -> -k`` before fitting, which makes the posterior mean exactly
even in ``k``.
"""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import NumericalError, PreconditionError
from .validation import as_1d_float, check_strictly_increasing

JITTER_FLOOR = 1e-12
JITTER_CEILING = 1e-8
GOLDEN = (math.sqrt(5) - 1) / 2


def se_kernel(xa, xb, signal_std, length_scale):
    d = np.subtract.outer(xa, xb)
    return signal_std ** 2 * np.exp(-0.5 * (d / length_scale) ** 2)


def _factor(xs, signal_std, length_scale, noise_var, max_noise=JITTER_CEILING):
    """Cholesky factor of K + noise I, escalating the jitter tenfold on failure."""
    base = se_kernel(xs, xs, signal_std, length_scale)
    noise = max(noise_var, JITTER_FLOOR)
    while True:
        try:
            chol = scipy.linalg.cholesky(base + noise * np.eye(len(xs)), lower=True)
            if np.all(np.diag(chol) > 0):
                return chol, noise
        except np.linalg.LinAlgError:
            pass
        if noise >= max_noise:
            raise NumericalError(
                f"kernel matrix not positive definite (length {length_scale:.3g}, "
                f"signal {signal_std:.3g}, jitter {noise:.1e})")
        noise = min(noise * 10, max_noise)


def _merge(xs, ys, extra_x, extra_y):
    """Append points whose abscissae are not already present, keep sorted order."""
    scale = max(np.max(np.abs(xs)), 1.0)
    new = np.array([not np.any(np.abs(xs - x) <= 1e-12 * scale) for x in extra_x], dtype=bool)
    if not new.any():
        return xs, ys
    allx = np.concatenate([xs, extra_x[new]])
    ally = np.concatenate([ys, extra_y[new]])
    order = np.argsort(allx, kind="stable")
    return allx[order], ally[order]


def _augment(xs, ys, edge, margin):
    """Apply E(k) = E(-k) and E(k) = E(k + 2 pi/a) to the training set.

    Mirror images come first; reciprocal-lattice images are then added within
    ``margin`` beyond each zone edge.
    """
    xs, ys = _merge(xs, ys, -xs, ys)
    if margin > 0:
        shifted_x = np.concatenate([xs + 2 * edge, xs - 2 * edge])
        shifted_y = np.concatenate([ys, ys])
        near = np.abs(shifted_x) <= edge + margin + 1e-12 * edge
        xs, ys = _merge(xs, ys, shifted_x[near], shifted_y[near])
    return xs, ys


class GprModel(RegressorMixin, BaseEstimator):
    """Squared-exponential GP regressor for one band ``E(k)``.

    Parameters
    ----------
    zone_edge : float, optional
        ``pi / a``.  Defaults to the largest ``|k|`` in the training data.
    n_grid : int
        Candidates per hyperparameter in the log-spaced likelihood search.
    signal_std, length_scale : float, optional
        Fix the hyperparameters instead of searching for them.
    noise_var : float
        Initial diagonal jitter; escalated up to 1e-8 if factorization fails.
    symmetrize : bool
        Mirror the training set so that the interpolant is even in ``k``.
    edge_margin : float
        Width, as a fraction of ``pi/a``, of the band copied across each zone
        edge by reciprocal-lattice translation.  Without it the interpolant is
        unconstrained past the edge and overshoots there.
    """

    def __init__(self, zone_edge=None, n_grid=20, signal_std=None, length_scale=None,
                 noise_var=JITTER_FLOOR, symmetrize=True, edge_margin=0.5):
        self.zone_edge = zone_edge
        self.n_grid = n_grid
        self.signal_std = signal_std
        self.length_scale = length_scale
        self.noise_var = noise_var
        self.symmetrize = symmetrize
        self.edge_margin = edge_margin

    def fit(self, X, y):
        fixed = self.signal_std is not None and self.length_scale is not None
        xs = as_1d_float(X, "k", min_length=1 if fixed else 5)
        ys = as_1d_float(y, "energies", min_length=len(xs))
        if len(ys) != len(xs):
            raise PreconditionError("X and y lengths differ")
        check_strictly_increasing(xs, "k samples")
        self.zone_edge_ = float(self.zone_edge) if self.zone_edge else float(np.max(np.abs(xs)))
        self.sample_spacing_ = float(np.min(np.diff(xs))) if len(xs) > 1 else self.zone_edge_
        if self.symmetrize:
            xs, ys = _augment(xs, ys, self.zone_edge_, self.edge_margin * self.zone_edge_)
        self.train_x_, self.train_y_ = xs, ys
        # standardize targets; kernel amplitude and jitter act on the scaled data
        self.y_offset_ = float(np.mean(ys))
        self.y_scale_ = float(np.std(ys)) or 1.0
        centred = (ys - self.y_offset_) / self.y_scale_

        if fixed:
            candidates = [(float(self.length_scale), float(self.signal_std) / self.y_scale_)]
        else:
            candidates = self._candidates(xs, ys)
        best = None
        for length, signal in candidates:
            try:
                chol, noise = _factor(xs, signal, length, self.noise_var)
            except NumericalError:
                continue
            lml = _lml(chol, centred)
            # candidates arrive with the longest length scale first: strict >
            # keeps that one on ties
            if best is None or lml > best[0]:
                best = (lml, length, signal, noise, chol)
        if best is None:
            raise NumericalError("no hyperparameter candidate gave a positive-definite kernel")
        (self.log_marginal_likelihood_, self.length_scale_, scaled_signal,
         self.noise_var_, self.chol_) = best
        self.signal_std_ = scaled_signal * self.y_scale_
        self.alpha_ = scipy.linalg.cho_solve((self.chol_, True), centred)
        return self

    def _candidates(self, xs, ys):
        dk = self.sample_spacing_
        span = 2 * self.zone_edge_
        spread = (float(np.ptp(ys)) or 1.0) / self.y_scale_
        lengths = np.geomspace(0.1 * dk, span, self.n_grid)[::-1]
        signals = np.geomspace(0.01 * spread, 10 * spread, self.n_grid)
        return [(l_, s_) for l_ in lengths for s_ in signals]

    def predict(self, X, return_var=False):
        check_is_fitted(self, "alpha_")
        xt = as_1d_float(X, "k")
        if self.symmetrize:
            # the mirrored fit is even in k; averaging +k and -k keeps that exact
            mean, var = self._posterior(xt)
            mean_r, var_r = self._posterior(-xt)
            mean, var = 0.5 * (mean + mean_r), 0.5 * (var + var_r)
        else:
            mean, var = self._posterior(xt)
        return (mean, var) if return_var else mean

    def _posterior(self, xt):
        sigma = self.signal_std_ / self.y_scale_
        kstar = se_kernel(self.train_x_, xt, sigma, self.length_scale_)
        mean = self.y_offset_ + self.y_scale_ * (kstar.T @ self.alpha_)
        v = scipy.linalg.solve_triangular(self.chol_, kstar, lower=True)
        var = np.maximum(sigma ** 2 - np.sum(v * v, axis=0), 0.0) * self.y_scale_ ** 2
        return mean, var


def _lml(chol, centred):
    alpha = scipy.linalg.cho_solve((chol, True), centred)
    n = len(centred)
    return float(-0.5 * centred @ alpha - np.sum(np.log(np.diag(chol)))
                 - 0.5 * n * math.log(2 * math.pi))


def fit_gpr(xs, ys, zone_edge=None):
    """Fit a :class:`GprModel` to one band with likelihood-selected hyperparameters."""
    return GprModel(zone_edge=zone_edge).fit(xs, ys)


def predict(model, targets):
    """Posterior ``(mean, variance)`` at ``targets``."""
    return model.predict(targets, return_var=True)


def log_marginal_likelihood(model):
    """Gaussian log evidence of the training targets under the fitted hyperparameters."""
    check_is_fitted(model, "chol_")
    centred = (model.train_y_ - model.y_offset_) / model.y_scale_
    # evidence of the original targets: undo the Jacobian of the standardization
    return _lml(model.chol_, centred) - len(centred) * math.log(model.y_scale_)


def _golden_section(f, lo, hi, tol):
    c, d = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def locate_minima(model, resolution=301, tol=1e-6):
    """Global minimum of the posterior mean on ``[0, pi/a]``.

    The best point of a dense grid is refined by golden-section search inside
    its neighbouring cells; results within one dense spacing of either end are
    snapped to ``0`` or ``pi/a``.
    """
    if resolution < 100:
        raise PreconditionError("resolution must be >= 100")
    check_is_fitted(model, "alpha_")
    edge = model.zone_edge_
    dense = np.linspace(0.0, edge, resolution)
    values = model.predict(dense)
    i = int(np.argmin(values))
    lo, hi = dense[max(i - 1, 0)], dense[min(i + 1, resolution - 1)]

    def mean_at(x):
        return float(model.predict([x])[0])

    k_min = _golden_section(mean_at, lo, hi, tol)
    if mean_at(k_min) > values[i]:
        k_min = dense[i]
    spacing = dense[1] - dense[0]
    if k_min <= spacing:
        k_min = 0.0
    elif k_min >= edge - spacing:
        k_min = edge
    return float(k_min), mean_at(k_min)


@dataclass(frozen=True, eq=False)
class MinimaTrack:
    q_values: np.ndarray
    k_min: np.ndarray
    e_min: np.ndarray
    zone_edge: float
    models: list = field(default_factory=list, repr=False)


def track_minima(structures, resolution=301):
    """GPR-refined ground-band minimum for each band structure, ordered by q."""
    structures = sorted(structures, key=lambda s: s.q)
    models, kmins, emins = [], [], []
    for s in structures:
        model = fit_gpr(s.k_grid, s.energies[0], zone_edge=s.zone_edge)
        k_min, e_min = locate_minima(model, resolution)
        models.append(model)
        kmins.append(k_min)
        emins.append(e_min)
    edge = structures[0].zone_edge if structures else float("nan")
    return MinimaTrack(q_values=np.array([s.q for s in structures]), k_min=np.array(kmins),
                       e_min=np.array(emins), zone_edge=edge, models=models)
