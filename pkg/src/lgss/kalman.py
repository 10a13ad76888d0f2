"""Moment-form Kalman filter: predict, update, gain identities, log-likelihood.

Conventions: the spec's ``init`` distribution is the t=1 *predictive*
(x̂_1|0, P_1|0), so the first step is a pure measurement update; the
predict/update alternation starts at t=2. The covariance update defaults
to the Joseph form, which stays PSD for any (not necessarily optimal)
gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian_core import Gaussian, SingularMatrix, inv, solve, symmetrize
from .lgssm import LgssmSpec, _control_at


class SingularInnovation(SingularMatrix):
    """Innovation covariance S is numerically singular."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FilterStep:
    """All quantities produced by one predict/update cycle at step ``t``."""

    t: int
    x_pred: np.ndarray
    p_pred: np.ndarray
    x_post: np.ndarray
    p_post: np.ndarray
    innovation: np.ndarray
    s: np.ndarray
    gain: np.ndarray
    post_fit_residual: np.ndarray
    loglik_increment: float

    def __post_init__(self):
        for name in ("x_pred", "p_pred", "x_post", "p_post", "innovation",
                     "s", "gain", "post_fit_residual"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass(frozen=True)
class FilterResult:
    """Filter output: per-step records plus the accumulated log-likelihood."""

    steps: tuple
    total_loglik: float

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    @property
    def x_post(self) -> np.ndarray:
        return np.array([s.x_post for s in self.steps])

    @property
    def p_post(self) -> np.ndarray:
        return np.array([s.p_post for s in self.steps])

    @property
    def x_pred(self) -> np.ndarray:
        return np.array([s.x_pred for s in self.steps])

    @property
    def p_pred(self) -> np.ndarray:
        return np.array([s.p_pred for s in self.steps])


def predict(prior: Gaussian, spec: LgssmSpec, u: np.ndarray | None, t: int,
            gain_prev: np.ndarray | None = None) -> Gaussian:
    """Time update: propagate the previous posterior through the dynamics.

    Returns N(F_t m + B_t u_t + c_t, F_t P F_t' + Q_t). ``gain_prev`` is
    forwarded to gain-feedback state offsets and ignored otherwise.
    """
    f = spec.f_at(t)
    if u is None:
        u = np.ones(spec.control_dim)
    mean = f @ prior.mean + spec.b_at(t) @ np.atleast_1d(u) + spec.c_at(t, gain_prev)
    cov = symmetrize(f @ prior.cov @ f.T + spec.q_at(t))
    return Gaussian(mean, cov)


def update(pred: Gaussian, z: np.ndarray, spec: LgssmSpec, t: int,
           form: str = "joseph") -> FilterStep:
    """Measurement update producing the full :class:`FilterStep` record.

    ``form`` selects the covariance update: "joseph"
    ((I-KH)P(I-KH)' + KRK', default) or "reduced" ((I-KH)P).
    """
    if form not in ("joseph", "reduced"):
        raise ValueError(f"unknown covariance update form {form!r}")
    h, r, d = spec.h_at(t), spec.r_at(t), spec.d_at(t)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    k_dim = h.shape[0]

    innovation = z - (h @ pred.mean + d)
    s = symmetrize(h @ pred.cov @ h.T + r)
    try:
        # K = P H' S^{-1}; solve on the transposed system avoids forming S^{-1}
        gain = solve(s, h @ pred.cov, "innovation covariance").T
        white = solve(s, innovation, "innovation covariance")
    except SingularMatrix as e:
        raise SingularInnovation(
            f"innovation covariance is singular at step {t}: {e}") from e

    x_post = pred.mean + gain @ innovation
    i_kh = np.eye(pred.dim) - gain @ h
    if form == "joseph":
        p_post = symmetrize(i_kh @ pred.cov @ i_kh.T + gain @ r @ gain.T)
    else:
        p_post = symmetrize(i_kh @ pred.cov)

    sign, logdet = np.linalg.slogdet(s)
    loglik = -0.5 * (k_dim * math.log(2.0 * math.pi) + logdet
                     + float(innovation @ white))
    return FilterStep(
        t=t, x_pred=pred.mean, p_pred=pred.cov, x_post=x_post, p_post=p_post,
        innovation=innovation, s=s, gain=gain,
        post_fit_residual=z - (h @ x_post + d), loglik_increment=loglik,
    )


def gain_forms(p_pred: np.ndarray, p_post: np.ndarray, spec: LgssmSpec,
               t: int) -> tuple:
    """The four algebraically equivalent expressions for the optimal gain.

    Returns (P H' S^{-1},
             (P^{-1} + H'R^{-1}H)^{-1} H'R^{-1},
             (P - P H' S^{-1} H P) H'R^{-1},
             P_post H'R^{-1});
    ``p_post`` must be the posterior covariance produced with the optimal
    gain for the last form to agree with the others.
    """
    h, r = spec.h_at(t), spec.r_at(t)
    p_pred = np.asarray(p_pred, dtype=float)
    p_post = np.asarray(p_post, dtype=float)
    s = symmetrize(h @ p_pred @ h.T + r)

    k1 = solve(s, h @ p_pred, "innovation covariance").T

    hr = solve(r, h, "measurement noise").T        # H' R^{-1}
    p_inv = inv(p_pred, "predicted covariance")
    k2 = solve(symmetrize(p_inv + hr @ h), hr, "information-form posterior precision")

    ph = p_pred @ h.T
    p_post_w = p_pred - ph @ solve(s, ph.T, "innovation covariance")
    k3 = p_post_w @ hr

    k4 = p_post @ hr
    return k1, k2, k3, k4


def kalman_filter(spec: LgssmSpec, observations, controls=None,
                  form: str = "joseph") -> FilterResult:
    """Run the forward filter over an observation sequence.

    ``observations`` has shape (T, k) (a 1-D array is treated as T scalar
    measurements). Step 1 applies the measurement update directly to
    ``spec.init``; later steps alternate predict and update. The
    log-likelihood increment at each step is
    -1/2 (k log 2pi + log det S + y'S^{-1}y) for innovation y.
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.ndim != 2 or obs.shape[0] == 0:
        raise ValueError("observations must be a non-empty (T, k) array")
    if obs.shape[1] != spec.obs_dim:
        raise ValueError(
            f"observations have dimension {obs.shape[1]}, model expects {spec.obs_dim}")

    steps = []
    gain_prev = None
    posterior = None
    for i, z in enumerate(obs):
        t = i + 1
        if t == 1:
            pred = spec.init
        else:
            u = _control_at(spec, controls, t)
            pred = predict(posterior, spec, u, t, gain_prev=gain_prev)
        step = update(pred, z, spec, t, form=form)
        steps.append(step)
        posterior = Gaussian(step.x_post, step.p_post)
        gain_prev = step.gain[:, 0] if step.gain.shape[1] == 1 else step.gain
    return FilterResult(steps=tuple(steps),
                        total_loglik=float(sum(s.loglik_increment for s in steps)))


# the module-level name `filter` shadows the builtin inside this file only;
# re-exported under both names for callers
filter = kalman_filter
