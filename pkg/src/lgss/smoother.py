"""Backward passes: RTS smoother, inverse dynamics, modified Bryson–Frazier
backward information filter, and two-filter posterior fusion.

The backward information filter conditions each state on *future*
observations only; fusing it with the forward filtered posterior (and
subtracting the unconditional prior, which both passes count) recovers
the full smoothing distribution. The fused-mean formula is exact for
chains whose unconditional state mean is zero; see :func:`fuse_posterior`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .gaussian_core import Gaussian, SingularMatrix, inv, solve, symmetrize
from .info_filter import SingularProcessNoise
from .kalman import FilterResult, FilterStep, _frozen
from .lgssm import (LgssmSpec, _control_at, _require_explicit_offsets,
                    unconditional_cov_seq)

#: |det F| below this triggers the epsilon perturbation before inversion
DET_TOL = 1e-10
#: diagonal perturbation applied to near-singular transition matrices
F_PERTURB = 1e-8


class SingularTransition(SingularMatrix):
    """F is singular beyond the perturbation tolerance; no inverse dynamics."""


class FusionFailure(RuntimeError):
    """Fused two-filter precision is not positive definite."""


class DegenerateTransitionWarning(UserWarning):
    """A near-singular transition matrix was perturbed before inversion."""


@dataclass(frozen=True)
class SmoothStep:
    """Smoothed moments at step ``t`` plus the backward gain L_t
    (None at the final step, which has no successor)."""

    t: int
    x_smooth: np.ndarray
    p_smooth: np.ndarray
    l_gain: np.ndarray | None

    def __post_init__(self):
        object.__setattr__(self, "x_smooth", _frozen(self.x_smooth))
        object.__setattr__(self, "p_smooth", _frozen(self.p_smooth))
        if self.l_gain is not None:
            object.__setattr__(self, "l_gain", _frozen(self.l_gain))


@dataclass(frozen=True)
class BackwardInfoStep:
    """Backward information-filter record at step ``t``.

    ``eta_future``/``lambda_future`` condition on observations strictly
    after t (η̂_t|t+1, Λ_t|t+1); ``eta_post``/``lambda_post`` additionally
    fold in z_t. ``m_tilde`` is the backward prediction factor (None at
    t=T, where the future-only pair is the unconditional prior).
    """

    t: int
    eta_future: np.ndarray
    lambda_future: np.ndarray
    eta_post: np.ndarray
    lambda_post: np.ndarray
    m_tilde: np.ndarray | None

    def __post_init__(self):
        for name in ("eta_future", "lambda_future", "eta_post", "lambda_post"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.m_tilde is not None:
            object.__setattr__(self, "m_tilde", _frozen(self.m_tilde))


@dataclass(frozen=True)
class InverseDynamics:
    """Reversed-arrow dynamics x_t = F̃ x_{t+1} + B̃ u + w̃, w̃ ~ N(0, Q̃)."""

    f_tilde: np.ndarray
    b_tilde: np.ndarray
    q_tilde: np.ndarray

    def __post_init__(self):
        for name in ("f_tilde", "b_tilde", "q_tilde"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def rts_smooth(filter_result: FilterResult, spec: LgssmSpec) -> tuple:
    """Backward smoothing sweep over a completed forward filter.

    L_t = P_t|t F_{t+1}' P_{t+1|t}⁻¹;
    x̂_t|T = x̂_t|t + L_t(x̂_{t+1|T} − x̂_{t+1|t});
    P_t|T = P_t|t + L_t(P_{t+1|T} − P_{t+1|t})L_t'.
    Returns a tuple of :class:`SmoothStep` in time order.
    """
    steps = filter_result.steps
    n_steps = len(steps)
    if n_steps == 0:
        return ()
    out = [SmoothStep(t=steps[-1].t, x_smooth=steps[-1].x_post,
                      p_smooth=steps[-1].p_post, l_gain=None)]
    for i in range(n_steps - 2, -1, -1):
        cur, nxt = steps[i], steps[i + 1]
        f_next = spec.f_at(nxt.t)
        try:
            l_gain = solve(nxt.p_pred, f_next @ cur.p_post,
                           "predicted covariance").T
        except SingularMatrix as e:
            raise SingularMatrix(
                f"predicted covariance is singular at step {nxt.t}: {e}") from e
        x_sm = cur.x_post + l_gain @ (out[-1].x_smooth - nxt.x_pred)
        p_sm = symmetrize(cur.p_post
                          + l_gain @ (out[-1].p_smooth - nxt.p_pred) @ l_gain.T)
        out.append(SmoothStep(t=cur.t, x_smooth=x_sm, p_smooth=p_sm,
                              l_gain=l_gain))
    return tuple(reversed(out))


def _invert_transition(f: np.ndarray, t: int) -> np.ndarray:
    if abs(np.linalg.det(f)) < DET_TOL:
        warnings.warn(
            f"transition matrix at step {t} is near-singular "
            f"(|det| < {DET_TOL:g}); perturbing by {F_PERTURB:g}·I before "
            "inversion", DegenerateTransitionWarning, stacklevel=3)
        f = f + F_PERTURB * np.eye(f.shape[0])
    try:
        return inv(f, "transition matrix")
    except SingularMatrix as e:
        raise SingularTransition(
            f"transition matrix at step {t} is singular beyond the "
            f"perturbation tolerance: {e}") from e


def inverse_dynamics(spec: LgssmSpec, p_uncond: np.ndarray, t: int) -> InverseDynamics:
    """Reversed-arrow dynamics mapping x_{t+1} back to x_t.

    ``p_uncond`` is the *unconditional* state covariance at step t+1 (it
    must be positive definite). With F = F_{t+1}, Q = Q_{t+1}, P = P_{t+1}:
    F̃ = F⁻¹(I − QP⁻¹), B̃ = −F⁻¹B, Q̃ = F⁻¹Q(I − P⁻¹Q)F⁻'.
    The forward covariance recursion then reads P_t = F̃ P_{t+1} F̃' + Q̃.
    """
    f = spec.f_at(t + 1)
    q = spec.q_at(t + 1)
    b = spec.b_at(t + 1)
    fi = _invert_transition(f, t + 1)
    pi = inv(np.asarray(p_uncond, dtype=float), "unconditional covariance")
    eye = np.eye(f.shape[0])
    return InverseDynamics(
        f_tilde=fi @ (eye - q @ pi),
        b_tilde=-fi @ b,
        q_tilde=symmetrize(fi @ q @ (eye - pi @ q) @ fi.T),
    )


def mbf_smooth(spec: LgssmSpec, observations, p_uncond_seq=None,
               controls=None) -> tuple:
    """Backward information filter over the observation sequence.

    Runs from t=T down to 1, conditioning on future observations only and
    then folding in the current measurement. Terminal condition: the
    future-only pair at T is the unconditional prior (Λ_T|T+1 = Σ_T⁻¹,
    η̂_T|T+1 = Σ_T⁻¹μ_T — no information beyond the prior). The backward
    prediction uses
    M̃_t = F'Q⁻¹(Λ_{t+1|t+1} + Q⁻¹ − P⁻¹)⁻¹ and
    Λ_t|t+1 = F'(Q − QP⁻¹Q)⁻¹F − M̃_t Q⁻¹F
    with F = F_{t+1}, Q = Q_{t+1} and P = Σ_{t+1} the unconditional
    covariance; the information-vector intercept is the exact backward
    offset b̃_t = μ_t − F̃_{t+1}μ_{t+1} built from unconditional means.

    ``p_uncond_seq`` (Σ_1..Σ_T) is computed from the spec when omitted.
    Requires Q ≻ 0 and explicit (non-gain-feedback) state offsets.
    """
    _require_explicit_offsets(spec, "mbf_smooth")
    obs = np.asarray(observations, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.ndim != 2 or obs.shape[0] == 0:
        raise ValueError("observations must be a non-empty (T, k) array")
    horizon = obs.shape[0]

    if p_uncond_seq is None:
        p_uncond_seq = unconditional_cov_seq(spec, horizon)
    mu_seq = [np.asarray(spec.init.mean, dtype=float)]
    for t in range(2, horizon + 1):
        u = _control_at(spec, controls, t)
        mu_seq.append(spec.f_at(t) @ mu_seq[-1] + spec.b_at(t) @ u + spec.c_at(t))

    def measurement_terms(t):
        h, d = spec.h_at(t), spec.d_at(t)
        hr = solve(spec.r_at(t), h, "measurement noise").T
        return h, d, hr

    # terminal step
    sig_t = np.asarray(p_uncond_seq[horizon - 1], dtype=float)
    lam_fut = inv(sig_t, "unconditional covariance")
    eta_fut = lam_fut @ mu_seq[horizon - 1]
    h, d, hr = measurement_terms(horizon)
    steps = [BackwardInfoStep(
        t=horizon, eta_future=eta_fut, lambda_future=lam_fut,
        eta_post=eta_fut + hr @ (obs[horizon - 1] - d),
        lambda_post=symmetrize(lam_fut + hr @ h), m_tilde=None)]

    for t in range(horizon - 1, 0, -1):
        f_n = spec.f_at(t + 1)
        q_n = spec.q_at(t + 1)
        eig_min = float(np.linalg.eigvalsh(symmetrize(q_n)).min())
        if eig_min <= 0.0:
            raise SingularProcessNoise(
                f"process noise at step {t + 1} is not positive definite "
                f"(min eigenvalue {eig_min:.4g}); the backward information "
                "filter requires Q > 0")
        qi = inv(q_n, "process noise")
        p_n = np.asarray(p_uncond_seq[t], dtype=float)      # Σ_{t+1}
        pi = inv(p_n, "unconditional covariance")

        nxt = steps[-1]
        inner = symmetrize(nxt.lambda_post + qi - pi)
        qif = qi @ f_n
        m_tilde = solve(inner, qif, "backward prediction inner term").T
        g = symmetrize(q_n - q_n @ pi @ q_n)
        lam_fut = symmetrize(f_n.T @ solve(g, f_n, "marginalized process noise")
                             - m_tilde @ qif)

        f_tilde = p_uncond_seq[t - 1] @ f_n.T @ pi
        intercept = mu_seq[t - 1] - f_tilde @ mu_seq[t]
        eta_fut = m_tilde @ nxt.eta_post + lam_fut @ intercept

        h, d, hr = measurement_terms(t)
        steps.append(BackwardInfoStep(
            t=t, eta_future=eta_fut, lambda_future=lam_fut,
            eta_post=eta_fut + hr @ (obs[t - 1] - d),
            lambda_post=symmetrize(lam_fut + hr @ h), m_tilde=m_tilde))
    return tuple(reversed(steps))


def fuse_posterior(forward: FilterStep, backward: BackwardInfoStep,
                   sigma_uncond: np.ndarray, mu_uncond=None) -> Gaussian:
    """Combine forward-filtered and backward (future-only) posteriors.

    P_t|T = (P_t|t⁻¹ + Λ_t|t+1 − Σ_t⁻¹)⁻¹ and
    x̂_t|T = P_t|T (P_t|t⁻¹ x̂_t|t + η̂_t|t+1), where Σ_t is the
    unconditional covariance counted by both passes. The mean formula is
    exact when the unconditional state mean is zero (the backward η then
    carries no prior-mean term); both filters see z_t exactly once
    because the backward factor enters through its future-only pair.

    Passing the unconditional mean as ``mu_uncond`` subtracts the prior
    information vector Σ_t⁻¹μ_t along with the prior precision, which
    makes the fused mean exact for nonzero-mean chains as well.
    """
    pf_inv = inv(np.asarray(forward.p_post, dtype=float), "filtered covariance")
    sig_inv = inv(np.asarray(sigma_uncond, dtype=float), "unconditional covariance")
    precision = symmetrize(pf_inv + backward.lambda_future - sig_inv)
    eig_min = float(np.linalg.eigvalsh(precision).min())
    if eig_min <= 0.0:
        raise FusionFailure(
            f"fused precision at step {forward.t} is not positive definite "
            f"(min eigenvalue {eig_min:.4g}); forward/backward/prior inputs "
            "are inconsistent")
    cov = symmetrize(inv(precision, "fused precision"))
    eta = pf_inv @ forward.x_post + backward.eta_future
    if mu_uncond is not None:
        eta = eta - sig_inv @ np.asarray(mu_uncond, dtype=float)
    mean = cov @ eta
    return Gaussian(mean, cov)
