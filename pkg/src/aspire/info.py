"""Mutual-information reward between the predicted target state and the
predicted, FOV-censored measurement.

The predicted measurement distribution is a Gaussian mixture over the
in-FOV particles plus a discrete atom at the empty observation carrying the
out-of-FOV mass. Four estimators of its entropy are provided:

* ``sp``       - sigma points per mixture component (the planning reward)
* ``mc``       - stratified Monte Carlo, used as the reference
* ``taylor0``  - zeroth-order Taylor expansion of log-density at the means
* ``taylor2``  - second-order Taylor expansion (Huber et al. 2008)

All entropies are in nats. Computations run in the whitened measurement
space ``a = L^{-1} z`` (``Sigma = L L^T``), where every component is an
isotropic unit Gaussian and the sigma points of component ``j`` are simply
``a_j`` and ``a_j +/- sqrt(lam + m) e_l``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .belief import simplify_arrays
from .dynamics import ControlInput, unicycle_step
from .sensing import LOG_2PI, MeasurementNoise, h_batch
from .task import TaskModel
from .world import ObstacleMap, Pose2D, SensorFootprint, visible

ESTIMATORS = ("sp", "sp_simplify", "mc", "taylor0", "taylor2")
_ALIASES = {"sp+simplify": "sp_simplify", "sp-simplify": "sp_simplify"}


def canonical_estimator(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in ESTIMATORS:
        raise ValueError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")
    return name


@dataclass(frozen=True)
class MIParams:
    """Estimator choice and its knobs. ``lam=None`` means ``3 - m``."""

    estimator: str = "sp_simplify"
    lam: Optional[float] = None
    cell_size: float = 0.5
    mc_samples: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "estimator", canonical_estimator(self.estimator))


def _xlogx(p: float) -> float:
    return p * np.log(p) if p > 0 else 0.0


def gaussian_entropy_h0(m: int, Sigma) -> float:
    """Differential entropy of an m-dimensional Gaussian, in nats."""
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if S.shape != (m, m):
        raise ValueError(f"Sigma must be {m}x{m}")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Sigma must be positive definite") from exc
    return 0.5 * m * (LOG_2PI + 1.0) + float(np.sum(np.log(np.diag(L))))


@dataclass(frozen=True)
class SigmaSet:
    points: np.ndarray
    weights: np.ndarray
    lam: float


def sigma_points(mu, Sigma, lam: float) -> SigmaSet:
    """``2m + 1`` symmetric sigma points from the lower Cholesky factor of
    ``(lam + m) Sigma`` (columns in index order)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    m = len(mu)
    if lam + m <= 0:
        raise ValueError("need lam + m > 0")
    L = np.linalg.cholesky((lam + m) * np.atleast_2d(np.asarray(Sigma, dtype=float)))
    pts = np.vstack([mu, mu + L.T, mu - L.T])
    w = np.full(2 * m + 1, 0.5 / (lam + m))
    w[0] = lam / (lam + m)
    return SigmaSet(pts, w, float(lam))


@dataclass(frozen=True)
class CensoredMixture:
    """In-FOV Gaussian components (unnormalised weights, means, shared noise)
    plus the probability mass of the empty observation."""

    weights: np.ndarray
    means: np.ndarray
    noise: MeasurementNoise
    empty_mass: float

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def detect_mass(self) -> float:
        return float(np.sum(self.weights))

    def continuous_part(self) -> "CensoredMixture":
        """The in-FOV mixture renormalised to unit mass, without the atom."""
        return CensoredMixture(self.weights / self.weights.sum(), self.means, self.noise, 0.0)

    def whitened(self) -> np.ndarray:
        return self.means @ self.noise.chol_inv.T


def build_censored_mixture(b_pred, robot_next: Pose2D, fp: SensorFootprint, omap: ObstacleMap,
                           noise: MeasurementNoise) -> CensoredMixture:
    """Split particles of a predicted belief by the FOV at ``robot_next``."""
    return _mixture(b_pred.particles, b_pred.weights, robot_next, fp, omap, noise)


def _mixture(particles, weights, robot, fp, omap, noise) -> CensoredMixture:
    inside = visible(robot, particles, fp, omap) & (weights > 0)
    w_in = weights[inside]
    empty = float(max(0.0, 1.0 - w_in.sum())) if len(w_in) else 1.0
    if not len(w_in):
        return CensoredMixture(w_in, np.empty((0, 2)), noise, 1.0)
    return CensoredMixture(w_in, h_batch(robot, particles[inside]), noise, empty)


def conditional_entropy(b_pred, robot_next: Pose2D, fp: SensorFootprint, omap: ObstacleMap,
                        noise: MeasurementNoise) -> float:
    inside = visible(robot_next, b_pred.particles, fp, omap)
    return gaussian_entropy_h0(noise.dim, noise.Sigma) * float(np.sum(b_pred.weights[inside]))


def _logsumexp(x: np.ndarray, axis: int) -> np.ndarray:
    top = np.max(x, axis=axis, keepdims=True)
    return np.squeeze(top, axis) + np.log(np.sum(np.exp(x - top), axis=axis))


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d2, 0.0)


def entropy_sp(mix: CensoredMixture, lam: Optional[float] = None) -> float:
    """Sigma-point approximation of the censored-measurement entropy."""
    h = -_xlogx(mix.empty_mass)
    if mix.n_components == 0:
        return h
    m = mix.noise.dim
    lam = 3.0 - m if lam is None else float(lam)
    if lam + m <= 0:
        raise ValueError("need lam + m > 0")
    s = np.sqrt(lam + m)
    a = mix.whitened()
    logw = np.log(mix.weights)
    diff = a[:, None, :] - a[None, :, :]
    base = logw[None, :] - 0.5 * np.sum(diff * diff, axis=-1)
    # Shift of the exponent for sigma point a_j +/- s e_l relative to a_j.
    shifted = [base]
    for ax in range(m):
        for sign in (1.0, -1.0):
            shifted.append(base - sign * s * diff[:, :, ax] - 0.5 * s * s)
    lse = _logsumexp(np.stack(shifted), axis=2) - mix.noise.log_norm
    ws = np.full(2 * m + 1, 0.5 / (lam + m))
    ws[0] = lam / (lam + m)
    p = ws @ lse
    return h - float(mix.weights @ p)


def _log_density_white(z_white: np.ndarray, a: np.ndarray, logw: np.ndarray, log_norm: float,
                       chunk: int = 2_000_000) -> np.ndarray:
    out = np.empty(len(z_white))
    step = max(1, chunk // max(1, len(a)))
    for i in range(0, len(z_white), step):
        zz = z_white[i:i + step]
        out[i:i + step] = _logsumexp(logw[None, :] - 0.5 * _sq_dists(zz, a), axis=1)
    return out - log_norm


def entropy_mc(mix: CensoredMixture, n_samples: int, rng) -> tuple[float, float]:
    """Stratified Monte Carlo estimate: the empty atom is exact, the
    continuous part is sampled. Returns ``(entropy, standard_error)``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    h = -_xlogx(mix.empty_mass)
    if mix.n_components == 0:
        return h, 0.0
    mass = mix.detect_mass
    a = mix.whitened()
    cdf = np.cumsum(mix.weights / mass)
    idx = np.minimum(np.searchsorted(cdf, rng.random(n_samples) * cdf[-1], side="right"), len(a) - 1)
    z = a[idx] + rng.standard_normal((n_samples, a.shape[1]))
    vals = -_log_density_white(z, a, np.log(mix.weights), mix.noise.log_norm)
    se = mass * float(np.std(vals, ddof=1)) / np.sqrt(n_samples) if n_samples > 1 else np.inf
    return h + mass * float(np.mean(vals)), float(se)


def _taylor_terms(mix: CensoredMixture):
    a = mix.whitened()
    logw = np.log(mix.weights)
    diff = a[:, None, :] - a[None, :, :]
    expo = logw[None, :] - 0.5 * np.sum(diff * diff, axis=-1)
    lse = _logsumexp(expo, axis=1)
    return diff, expo, lse


def entropy_taylor0(mix: CensoredMixture) -> float:
    h = -_xlogx(mix.empty_mass)
    if mix.n_components == 0:
        return h
    _, _, lse = _taylor_terms(mix)
    return h - float(mix.weights @ (lse - mix.noise.log_norm))


def entropy_taylor2(mix: CensoredMixture) -> float:
    """Zeroth-order term plus ``-sum_j w_j/2 tr(Sigma Hess log g(mu_j))``.

    In whitened coordinates the trace is the Laplacian of log g:
    ``sum_i r_i (|d_i|^2 - m) - |sum_i r_i d_i|^2`` with responsibilities
    ``r_i`` and offsets ``d_i = a_j - a_i``.
    """
    h = -_xlogx(mix.empty_mass)
    if mix.n_components == 0:
        return h
    m = mix.noise.dim
    diff, expo, lse = _taylor_terms(mix)
    r = np.exp(expo - lse[:, None])
    d2 = np.sum(diff * diff, axis=-1)
    grad = np.einsum("ji,jik->jk", r, diff)
    lap = np.sum(r * (d2 - m), axis=1) - np.sum(grad * grad, axis=1)
    h0th = h - float(mix.weights @ (lse - mix.noise.log_norm))
    return h0th - 0.5 * float(mix.weights @ lap)


def mixture_entropy(mix: CensoredMixture, estimator: str, params: MIParams = MIParams(),
                    rng=None) -> float:
    estimator = canonical_estimator(estimator)
    if estimator in ("sp", "sp_simplify"):
        return entropy_sp(mix, params.lam)
    if estimator == "mc":
        if rng is None:
            raise ValueError("the Monte Carlo estimator needs an rng")
        return entropy_mc(mix, params.mc_samples, rng)[0]
    if estimator == "taylor0":
        return entropy_taylor0(mix)
    return entropy_taylor2(mix)


def predicted_mixture(robot_next: Pose2D, particles: np.ndarray, weights: np.ndarray,
                      model: TaskModel, cell_size: Optional[float] = None) -> Optional[CensoredMixture]:
    """Censored mixture at ``robot_next``; None when nothing can be in view.

    With ``cell_size`` the particles are merged per grid cell first.
    """
    fp = model.footprint
    reach = fp.r_max + (cell_size * 1.5 if cell_size else 0.0)
    dx = particles[:, 0] - robot_next.x
    dy = particles[:, 1] - robot_next.y
    if not np.any(dx * dx + dy * dy <= reach * reach):
        return None
    if cell_size:
        particles, weights = simplify_arrays(particles, weights, cell_size)
        weights = weights / weights.sum()
    return _mixture(particles, weights, robot_next, fp, model.omap, model.noise)


def mi_from_mixture(mix: Optional[CensoredMixture], estimator: str, params: MIParams,
                    h0: float, rng=None) -> float:
    if mix is None or mix.n_components == 0:
        return 0.0
    return mixture_entropy(mix, estimator, params, rng) - h0 * mix.detect_mass


def reward_from_drift(robot_next: Pose2D, drifted: np.ndarray, weights: np.ndarray,
                      model: TaskModel, params: MIParams, h0: float, rng=None) -> float:
    """MI given already-propagated (noise-free) particle states."""
    cell = params.cell_size if params.estimator == "sp_simplify" else None
    mix = predicted_mixture(robot_next, drifted, weights, model, cell)
    return mi_from_mixture(mix, params.estimator, params, h0, rng)


def mutual_information(b, action, model: TaskModel, estimator: Optional[str] = None,
                       params: Optional[MIParams] = None, rng=None) -> float:
    """MI between the next target state and the next measurement after the
    robot applies ``action`` from belief ``b``.

    Particles are propagated with the noise-free target drift; weights are
    kept as they are.
    """
    params = params or MIParams()
    if estimator is not None:
        params = MIParams(estimator, params.lam, params.cell_size, params.mc_samples)
    u = ControlInput(*action)
    robot_next = unicycle_step(b.robot, u, model.robot.dt)
    drifted = model.target.drift(b.particles, getattr(b, "k", 0))
    h0 = gaussian_entropy_h0(model.noise.dim, model.noise.Sigma)
    return reward_from_drift(robot_next, drifted, b.weights, model, params, h0, rng)
