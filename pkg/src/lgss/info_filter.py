"""Canonical-parameter (information) filter.

The same forward recursion as the moment-form filter, carried in the
precision matrix Λ = P⁻¹ and information vector η = P⁻¹x̂. The predict
step uses the precomputed factor
M_t = Q⁻¹F(Λ_{t-1|t-1} + F'Q⁻¹F)⁻¹ so only the process-noise inverse is
formed explicitly. Requires Q ≻ 0; an opt-in diagonal jitter exists for
exploring models with singular process noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian_core import SingularMatrix, inv, solve, symmetrize
from .kalman import _frozen
from .lgssm import LgssmSpec, _control_at

#: diagonal added to Q when jitter is requested
JITTER = 1e-9


class SingularProcessNoise(SingularMatrix):
    """Q is not positive definite; the information recursion needs Q⁻¹."""


class SingularMeasurementNoise(SingularMatrix):
    """R is not invertible; the canonical update needs R⁻¹."""


@dataclass(frozen=True)
class InfoStep:
    """Canonical-parameter record for one step: predicted and posterior
    (η, Λ) pairs plus the precomputed prediction factor M_t (None at t=1,
    where the predicted pair is the initial distribution itself)."""

    t: int
    eta_pred: np.ndarray
    lambda_pred: np.ndarray
    eta_post: np.ndarray
    lambda_post: np.ndarray
    m: np.ndarray | None

    def __post_init__(self):
        for name in ("eta_pred", "lambda_pred", "eta_post", "lambda_post"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.m is not None:
            object.__setattr__(self, "m", _frozen(self.m))


def _q_inverse(spec: LgssmSpec, t: int, jitter: bool) -> np.ndarray:
    q = spec.q_at(t)
    if jitter:
        q = q + JITTER * np.eye(q.shape[0])
    eig_min = float(np.linalg.eigvalsh(symmetrize(q)).min())
    if eig_min <= 0.0:
        raise SingularProcessNoise(
            f"process noise at step {t} is not positive definite "
            f"(min eigenvalue {eig_min:.4g}); the information filter requires "
            "Q > 0 — fix the model's process noise or opt into jitter=True")
    return inv(q, "process noise")


def info_predict(prev: InfoStep, spec: LgssmSpec, u: np.ndarray | None, t: int,
                 jitter: bool = False,
                 gain_prev: np.ndarray | None = None) -> tuple:
    """Time update in canonical parameters.

    Returns (eta_pred, lambda_pred, m) where
    m = Q⁻¹F(Λ_prev + F'Q⁻¹F)⁻¹, Λ_pred = Q⁻¹ − mF'Q⁻¹ and
    η_pred = m η_prev + Λ_pred(Bu + c).
    """
    f = spec.f_at(t)
    qi = _q_inverse(spec, t, jitter)
    if u is None:
        u = np.ones(spec.control_dim)
    inner = symmetrize(prev.lambda_post + f.T @ qi @ f)
    qif = qi @ f
    m = solve(inner, qif.T, "prediction inner term").T
    lambda_pred = symmetrize(qi - m @ f.T @ qi)
    shift = spec.b_at(t) @ np.atleast_1d(u) + spec.c_at(t, gain_prev)
    eta_pred = m @ prev.eta_post + lambda_pred @ shift
    return eta_pred, lambda_pred, m


def info_update(pred, z, spec: LgssmSpec, t: int) -> tuple:
    """Measurement update: add H'R⁻¹(z − d) and H'R⁻¹H to the predicted pair.

    ``pred`` is any sequence whose first two entries are (eta_pred,
    lambda_pred), so the output of :func:`info_predict` composes directly.
    """
    eta_pred, lambda_pred = pred[0], pred[1]
    h, d = spec.h_at(t), spec.d_at(t)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    try:
        hr = solve(spec.r_at(t), h, "measurement noise").T     # H' R^{-1}
    except SingularMatrix as e:
        raise SingularMeasurementNoise(
            f"measurement noise at step {t} is not invertible: {e}") from e
    eta_post = eta_pred + hr @ (z - d)
    lambda_post = symmetrize(lambda_pred + hr @ h)
    return eta_post, lambda_post


def info_filter(spec: LgssmSpec, observations, controls=None,
                jitter: bool = False) -> tuple:
    """Run the information filter; returns a tuple of :class:`InfoStep`.

    Initialization is Λ_1|0 = P_1|0⁻¹ and η_1|0 = Λ_1|0 x̂_1|0 from
    ``spec.init`` (which must therefore have an invertible covariance).
    Gain-feedback state offsets are supported: the gain is recovered
    canonically as K = Λ_post⁻¹H'R⁻¹ after each update.
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.ndim != 2 or obs.shape[0] == 0:
        raise ValueError("observations must be a non-empty (T, k) array")

    lambda_init = inv(spec.init.cov, "initial covariance")
    eta_init = lambda_init @ spec.init.mean

    steps: list[InfoStep] = []
    gain_prev = None
    for i, z in enumerate(obs):
        t = i + 1
        if t == 1:
            eta_pred, lambda_pred, m = eta_init, lambda_init, None
        else:
            u = _control_at(spec, controls, t)
            eta_pred, lambda_pred, m = info_predict(
                steps[-1], spec, u, t, jitter=jitter, gain_prev=gain_prev)
        eta_post, lambda_post = info_update((eta_pred, lambda_pred), z, spec, t)
        steps.append(InfoStep(t=t, eta_pred=eta_pred, lambda_pred=lambda_pred,
                              eta_post=eta_post, lambda_post=lambda_post, m=m))
        if spec.has_gain_feedback:
            hr = solve(spec.r_at(t), spec.h_at(t), "measurement noise").T
            gain = solve(lambda_post, hr, "posterior precision")
            gain_prev = gain[:, 0] if gain.shape[1] == 1 else gain
    return tuple(steps)
