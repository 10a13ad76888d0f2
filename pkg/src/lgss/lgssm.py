"""Linear-Gaussian state-space model specification and moment propagation.

The model is

    x_t = F_t x_{t-1} + B_t u_t + c_t + w_t,   w_t ~ N(0, Q_t)
    z_t = H_t x_t + d_t + v_t,                 v_t ~ N(0, R_t)

with ``x_1 ~ init``. System matrices may be constants or per-step
providers (callables of the 1-based step index). :func:`build_model`
assembles the four standard parameterized models plus a scalar one used
by the EM fitting path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .gaussian_core import Gaussian, symmetrize

#: floor applied to the measurement-noise eigenvalues at assembly
R_FLOOR = 1e-8

#: expected parameter-vector length per model id
MODEL_ARITY = {0: 4, 1: 5, 2: 6, 3: 11, 4: 15}


class ParamArity(ValueError):
    """Parameter vector length does not match the model id."""


class InvalidModel(ValueError):
    """Parameter vector contains non-finite entries."""


class ModelAssemblyWarning(UserWarning):
    """A noise matrix was repaired (clamped/floored) during assembly."""


class GainFeedbackOffset:
    """State offset ``c_t = scale * (center - K_{t-1})`` driven by the filter gain.

    ``K_{t-1}`` is the previous step's posterior gain (an n-vector for a
    scalar measurement), taken as zero before the first update. The offset
    is a property of the running filter, not of the generative model, so
    unconditional-moment operations reject specs that carry one.
    """

    def __init__(self, scale, center):
        self.scale = np.asarray(scale, dtype=float)
        self.center = np.asarray(center, dtype=float)

    def __call__(self, t: int, gain_prev: np.ndarray | None) -> np.ndarray:
        k = np.zeros_like(self.scale) if gain_prev is None else np.asarray(gain_prev, float).ravel()
        return self.scale * (self.center - k)

    def __repr__(self):
        return f"GainFeedbackOffset(scale={self.scale!r}, center={self.center!r})"


def _materialize(entry, t: int) -> np.ndarray:
    if callable(entry):
        return np.asarray(entry(t), dtype=float)
    return entry


@dataclass(frozen=True)
class LgssmSpec:
    """System matrices, offsets and the initial state distribution.

    Each of ``f``, ``b``, ``h``, ``q``, ``r``, ``d_offset`` is either a
    constant array or a callable ``t -> array`` (1-based step index).
    ``c_offset`` may additionally be a :class:`GainFeedbackOffset`.
    Dimension and noise-validity checks are performed on the step-1
    matrices; ``r`` must be positive definite, ``q`` PSD.
    """

    f: object
    b: object
    h: object
    q: object
    r: object
    c_offset: object
    d_offset: object
    init: Gaussian

    def __post_init__(self):
        for name in ("f", "b", "h", "q", "r", "c_offset", "d_offset"):
            val = getattr(self, name)
            if not callable(val):
                arr = np.asarray(val, dtype=float)
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)
        f1, h1, q1, r1 = (self.f_at(1), self.h_at(1), self.q_at(1), self.r_at(1))
        n = self.init.dim
        k = h1.shape[0]
        if f1.shape != (n, n):
            raise ValueError(f"transition matrix is {f1.shape}, state dim is {n}")
        if h1.shape[1] != n:
            raise ValueError(f"measurement matrix is {h1.shape}, state dim is {n}")
        if q1.shape != (n, n) or r1.shape != (k, k):
            raise ValueError("noise covariance shapes do not match the model dims")
        if np.abs(q1 - q1.T).max(initial=0.0) > 1e-10 or np.abs(r1 - r1.T).max(initial=0.0) > 1e-10:
            raise ValueError("noise covariances must be symmetric")
        if float(np.linalg.eigvalsh(symmetrize(q1)).min()) < -1e-10:
            raise ValueError("process noise covariance must be PSD")
        if float(np.linalg.eigvalsh(symmetrize(r1)).min()) <= 0.0:
            raise ValueError("measurement noise covariance must be positive definite")
        if self.b_at(1).shape[0] != n:
            raise ValueError("control matrix row count must equal the state dim")

    # --- per-step accessors ------------------------------------------------

    def f_at(self, t: int) -> np.ndarray:
        return np.atleast_2d(_materialize(self.f, t))

    def b_at(self, t: int) -> np.ndarray:
        return np.atleast_2d(_materialize(self.b, t))

    def h_at(self, t: int) -> np.ndarray:
        return np.atleast_2d(_materialize(self.h, t))

    def q_at(self, t: int) -> np.ndarray:
        return np.atleast_2d(_materialize(self.q, t))

    def r_at(self, t: int) -> np.ndarray:
        return np.atleast_2d(_materialize(self.r, t))

    def c_at(self, t: int, gain_prev: np.ndarray | None = None) -> np.ndarray:
        c = self.c_offset
        if isinstance(c, GainFeedbackOffset):
            return c(t, gain_prev)
        return np.atleast_1d(_materialize(c, t))

    def d_at(self, t: int) -> np.ndarray:
        return np.atleast_1d(_materialize(self.d_offset, t))

    @property
    def state_dim(self) -> int:
        return self.init.dim

    @property
    def obs_dim(self) -> int:
        return self.h_at(1).shape[0]

    @property
    def control_dim(self) -> int:
        return self.b_at(1).shape[1]

    @property
    def has_gain_feedback(self) -> bool:
        return isinstance(self.c_offset, GainFeedbackOffset)


@dataclass(frozen=True)
class ModelParams:
    """Parameter vector for one of the canned model layouts.

    model_id 1/2 are constant-velocity price+slope models (5/6 params),
    3/4 are fully parameterized 2-state models (11/15 params, model 4 adds
    a gain-feedback state offset), and 0 is the scalar AR(1)+noise model
    (4 params: f, sigma_w, sigma_v, p0) used by the EM fitting path.
    """

    p: tuple
    model_id: int
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        if self.model_id not in MODEL_ARITY:
            raise ParamArity(f"unknown model_id {self.model_id}")
        want = MODEL_ARITY[self.model_id]
        if len(self.p) != want:
            raise ParamArity(
                f"model {self.model_id} takes {want} parameters, got {len(self.p)}"
            )


def _clamp_psd(m: np.ndarray, what: str) -> np.ndarray:
    """Clamp negative eigenvalues to zero; warn when the deficit is real.

    Rounding can leave eigenvalues a hair below zero on matrices that are
    PSD by construction (e.g. rank-deficient outer products), so negatives
    within a relative tolerance are clamped silently.
    """
    m = symmetrize(m)
    vals, vecs = np.linalg.eigh(m)
    eig_min = vals.min(initial=0.0)
    if eig_min < 0.0:
        tol = 1e-10 * max(1.0, float(np.trace(m)))
        if eig_min < -tol:
            warnings.warn(
                f"{what} had negative eigenvalues (min {eig_min:.4g}); "
                "clamped to 0",
                ModelAssemblyWarning,
                stacklevel=3,
            )
        vals = np.maximum(vals, 0.0)
        m = symmetrize((vecs * vals) @ vecs.T)
    return m


def _floor_pd(m: np.ndarray, what: str) -> np.ndarray:
    """Shift eigenvalues so the smallest equals R_FLOOR, warning if needed."""
    m = symmetrize(m)
    eig_min = float(np.linalg.eigvalsh(m).min())
    if eig_min < R_FLOOR:
        warnings.warn(
            f"{what} is not positive definite (min eigenvalue {eig_min:.4g}); "
            f"floored at {R_FLOOR:g}",
            ModelAssemblyWarning,
            stacklevel=3,
        )
        m = m + (R_FLOOR - eig_min) * np.eye(m.shape[0])
    return m


def build_model(params: ModelParams) -> LgssmSpec:
    """Assemble the spec for a :class:`ModelParams` vector.

    Noise matrices are repaired rather than rejected (negative Q/P0
    eigenvalues clamped at zero, non-PD R floored at ``R_FLOOR``) because
    the calibration optimizer explores the parameter space freely; each
    repair emits a :class:`ModelAssemblyWarning`. Non-finite parameters
    raise :class:`InvalidModel`.
    """
    p = np.asarray(params.p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise InvalidModel("parameter vector contains non-finite entries")
    mid = params.model_id

    if mid == 0:
        f_, sw, sv, p0 = p
        f = np.array([[f_]])
        h = np.array([[1.0]])
        q = _clamp_psd(np.array([[sw * sw]]), "process noise")
        r = _floor_pd(np.array([[sv * sv]]), "measurement noise")
        p0m = _clamp_psd(np.array([[p0]]), "initial covariance")
        return LgssmSpec(
            f=f, b=np.zeros((1, 1)), h=h, q=q, r=r,
            c_offset=np.zeros(1), d_offset=np.zeros(1),
            init=Gaussian(np.zeros(1), p0m),
        )

    if mid in (1, 2):
        f = np.array([[1.0, params.dt], [0.0, 1.0]])
        h = np.array([[1.0, 0.0]])
        q = np.array([[p[0] ** 2, p[0] * p[1]], [p[0] * p[1], p[2] ** 2]])
        r = np.array([[p[3]]])
        diag = (p[4], p[4]) if mid == 1 else (p[4], p[5])
        c_offset = np.zeros(2)
    else:
        f = np.array([[p[0], p[1]], [0.0, p[2]]])
        h = np.array([[p[3], p[4]]])
        q = np.array([[p[5] ** 2, p[5] * p[6]], [p[6] * p[5], p[7] ** 2]])
        r = np.array([[p[8]]])
        diag = (p[9], p[10])
        if mid == 4:
            c_offset = GainFeedbackOffset(scale=[p[11], p[13]], center=[p[12], p[14]])
        else:
            c_offset = np.zeros(2)

    q = _clamp_psd(q, "process noise")
    r = _floor_pd(r, "measurement noise")
    p0m = _clamp_psd(np.diag(diag), "initial covariance")
    return LgssmSpec(
        f=f, b=np.zeros((2, 1)), h=h, q=q, r=r,
        c_offset=c_offset, d_offset=np.zeros(1),
        init=Gaussian(np.zeros(2), p0m),
    )


def _require_explicit_offsets(spec: LgssmSpec, op: str):
    if spec.has_gain_feedback:
        raise ValueError(
            f"{op} is undefined for gain-feedback state offsets: the offset is "
            "a filter quantity, not part of the generative model. Supply an "
            "explicit per-step c_offset instead."
        )


def unconditional_mean(spec: LgssmSpec, x1: np.ndarray, t: int,
                       controls=None) -> np.ndarray:
    """Unconditional state mean at step ``t`` (1-based) starting from ``x1``.

    Iterates ``m_k = F_k m_{k-1} + B_k u_k + c_k`` for k = 2..t; at t = 1
    the product is empty and ``x1`` is returned unchanged. ``controls``
    may be a (t, m) array; absent controls default to u = 1.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    _require_explicit_offsets(spec, "unconditional_mean")
    m = np.asarray(x1, dtype=float).copy()
    for k in range(2, t + 1):
        u = _control_at(spec, controls, k)
        m = spec.f_at(k) @ m + spec.b_at(k) @ u + spec.c_at(k)
    return m


def lyapunov_step(spec: LgssmSpec, p_prev: np.ndarray, t: int) -> np.ndarray:
    """One step of the unconditional covariance recursion.

    Returns ``F_t p_prev F_t.T + Q_t`` symmetrized, i.e. the covariance at
    step ``t`` given the covariance ``p_prev`` at step ``t - 1``.
    """
    f = spec.f_at(t)
    return symmetrize(f @ p_prev @ f.T + spec.q_at(t))


def unconditional_cov_seq(spec: LgssmSpec, horizon: int) -> list[np.ndarray]:
    """Unconditional covariances P_1..P_horizon (P_1 = init covariance)."""
    out = [np.array(spec.init.cov)]
    for t in range(2, horizon + 1):
        out.append(lyapunov_step(spec, out[-1], t))
    return out


def neighbor_cov(spec: LgssmSpec, p_t: np.ndarray, t: int) -> np.ndarray:
    """Cross-covariance Cov(x_{t+1}, x_t) = F_{t+1} P_t.

    ``p_t`` is the unconditional covariance at step ``t``; the transposed
    block Cov(x_t, x_{t+1}) is ``P_t F_{t+1}.T``.
    """
    return spec.f_at(t + 1) @ np.asarray(p_t, dtype=float)


def _control_at(spec: LgssmSpec, controls, t: int) -> np.ndarray:
    if controls is None:
        return np.ones(spec.control_dim)
    return np.atleast_1d(np.asarray(controls, dtype=float)[t - 1])


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(symmetrize(m))
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T


def simulate(spec: LgssmSpec, horizon: int, seed: int,
             controls=None) -> tuple[np.ndarray, np.ndarray]:
    """Draw one trajectory of states and observations.

    Uses a counter-based Philox generator so a fixed ``seed`` gives a
    reproducible draw. Returns ``(states, observations)`` with shapes
    ``(horizon, n)`` and ``(horizon, k)``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    _require_explicit_offsets(spec, "simulate")
    rng = np.random.Generator(np.random.Philox(seed))
    n, k = spec.state_dim, spec.obs_dim
    states = np.empty((horizon, n))
    obs = np.empty((horizon, k))
    sq_init = _sqrt_psd(spec.init.cov)
    x = spec.init.mean + sq_init @ rng.standard_normal(n)
    for t in range(1, horizon + 1):
        if t > 1:
            u = _control_at(spec, controls, t)
            w = _sqrt_psd(spec.q_at(t)) @ rng.standard_normal(n)
            x = spec.f_at(t) @ x + spec.b_at(t) @ u + spec.c_at(t) + w
        v = _sqrt_psd(spec.r_at(t)) @ rng.standard_normal(k)
        states[t - 1] = x
        obs[t - 1] = spec.h_at(t) @ x + spec.d_at(t) + v
    return states, obs
