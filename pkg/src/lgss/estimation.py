"""Parameter fitting: EM for the scalar state-space model and a full
(μ/μ_w, λ) CMA-ES minimizer with cumulative step-size adaptation.

The EM default maximizes the expected complete-data log-likelihood using
smoothed second moments and lag-one cross moments, which carries the
monotone-likelihood guarantee. A point-estimate variant of the M-step
(plugging smoothed or filtered means into the quotient formulas) is
available as ``m_step="plugin"``; it is not monotone in general, so it
stops at the first likelihood decrease and returns the best iterate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)

#: variance floor applied to sigma_v^2 / sigma_w^2 during EM
VAR_FLOOR = 1e-12


class UnsupportedModel(ValueError):
    """EM supports only the scalar (1-D state, 1-D measurement) model."""


class InvalidPopulation(ValueError):
    """CMA-ES population size must be at least 2."""


class CovarianceRepairWarning(UserWarning):
    """The CMA-ES covariance lost positive definiteness and was repaired."""


# ---------------------------------------------------------------------------
# EM for the scalar model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmState:
    """Fit result: theta = (sigma_v_sq, sigma_w_sq, f), the per-iteration
    log-likelihood trace, and bookkeeping flags."""

    theta: tuple
    loglik_history: tuple
    iteration: int
    converged: bool
    flags: tuple = ()

    @property
    def sigma_v_sq(self) -> float:
        return self.theta[0]

    @property
    def sigma_w_sq(self) -> float:
        return self.theta[1]

    @property
    def f(self) -> float:
        return self.theta[2]


def _scalar_pass(z: list, f: float, sw2: float, sv2: float,
                 mu0: float, p0: float):
    """Forward filter + backward smoother for x_t = f x_{t-1} + w, z_t = x_t + v.

    Returns (loglik, xp, pp, xf, pf, xs, ps, l_gains); all lists of floats.
    """
    n = len(z)
    xp = [0.0] * n
    pp = [0.0] * n
    xf = [0.0] * n
    pf = [0.0] * n
    ll = 0.0
    for t in range(n):
        if t == 0:
            xp[0] = mu0
            pp[0] = p0
        else:
            xp[t] = f * xf[t - 1]
            pp[t] = f * f * pf[t - 1] + sw2
        s = pp[t] + sv2
        y = z[t] - xp[t]
        k = pp[t] / s
        xf[t] = xp[t] + k * y
        pf[t] = (1.0 - k) * pp[t]
        ll -= 0.5 * (_LOG_2PI + math.log(s) + y * y / s)
    xs = [0.0] * n
    ps = [0.0] * n
    lg = [0.0] * (n - 1)
    xs[n - 1] = xf[n - 1]
    ps[n - 1] = pf[n - 1]
    for t in range(n - 2, -1, -1):
        l = pf[t] * f / pp[t + 1]
        lg[t] = l
        xs[t] = xf[t] + l * (xs[t + 1] - xp[t + 1])
        ps[t] = pf[t] + l * l * (ps[t + 1] - pp[t + 1])
    return ll, xp, pp, xf, pf, xs, ps, lg


def em_fit(data, init_theta=None, max_iter: int = 200, tol: float = 1e-7,
           m_step: str = "expected", e_step: str = "smoothed") -> EmState:
    """Fit (sigma_v^2, sigma_w^2, f) of the scalar model by EM.

    The state prior is held fixed at N(z_1, var(z) + 1) throughout. The
    default M-step uses expected sufficient statistics
    (E[x_t^2 | z] = P_t|N + x̂_t|N^2 and the lag-one cross moment
    E[x_t x_{t+1} | z] = L_t P_{t+1|N} + x̂_t|N x̂_{t+1|N}), so the
    likelihood trace is non-decreasing. ``m_step="plugin"`` instead plugs
    point estimates (smoothed by default, ``e_step="filtered"`` for
    filtered) into the quotient formulas; it stops on the first
    likelihood decrease and returns the best iterate.
    """
    z_arr = np.asarray(data, dtype=float)
    if z_arr.ndim == 2 and z_arr.shape[1] == 1:
        z_arr = z_arr[:, 0]
    if z_arr.ndim != 1:
        raise UnsupportedModel(
            f"EM fitting covers the scalar model only; got observations of "
            f"shape {np.asarray(data).shape}")
    if z_arr.shape[0] < 2:
        raise ValueError("EM needs at least 2 observations")
    if m_step not in ("expected", "plugin"):
        raise ValueError(f"unknown m_step {m_step!r}")
    if e_step not in ("smoothed", "filtered"):
        raise ValueError(f"unknown e_step {e_step!r}")
    if m_step == "expected" and e_step == "filtered":
        raise ValueError(
            "expected-statistics M-step requires the smoothed E-step")

    z = z_arr.tolist()
    n = len(z)
    z_var = float(np.var(z_arr))
    mu0 = z[0]
    p0 = z_var + 1.0

    flags = []
    if init_theta is None:
        base = max(z_var, 1e-6)
        sv2, sw2, f = 0.5 * base, 0.5 * base, 0.5
    else:
        sv2, sw2, f = (float(v) for v in init_theta)
    sv2 = max(sv2, VAR_FLOOR)
    sw2 = max(sw2, VAR_FLOOR)

    history: list[float] = []
    iteration = 0
    converged = False
    for iteration in range(1, max_iter + 1):
        ll, xp, pp, xf, pf, xs, ps, lg = _scalar_pass(z, f, sw2, sv2, mu0, p0)
        if history and m_step == "plugin" and ll < history[-1] - 1e-12:
            # revert to the parameters that produced the last recorded
            # (higher) likelihood and stop: the plug-in step is not monotone
            sv2, sw2, f = prev_theta
            flags.append("plugin_loglik_decrease")
            break
        history.append(ll)
        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            converged = True
            break
        prev_theta = (sv2, sw2, f)

        if m_step == "expected":
            xs_a = np.array(xs)
            ps_a = np.array(ps)
            lg_a = np.array(lg)
            ex2 = ps_a + xs_a * xs_a
            exx = lg_a * ps_a[1:] + xs_a[:-1] * xs_a[1:]
            f = float(exx.sum() / ex2[:-1].sum())
            sw2 = float(np.mean(ex2[1:] - 2.0 * f * exx + f * f * ex2[:-1]))
            sv2 = float(np.mean((z_arr - xs_a) ** 2 + ps_a))
        else:
            xh = np.array(xs if e_step == "smoothed" else xf)
            f = float((xh[:-1] * xh[1:]).sum() / (xh[:-1] ** 2).sum())
            sw2 = float(np.mean((xh[1:] - f * xh[:-1]) ** 2))
            sv2 = float(np.mean((z_arr - xh) ** 2))

        if sv2 < VAR_FLOOR or sw2 < VAR_FLOOR:
            if "variance_floor" not in flags:
                flags.append("variance_floor")
            sv2 = max(sv2, VAR_FLOOR)
            sw2 = max(sw2, VAR_FLOOR)
    return EmState(theta=(sv2, sw2, f), loglik_history=tuple(history),
                   iteration=iteration, converged=converged,
                   flags=tuple(flags))


# ---------------------------------------------------------------------------
# CMA-ES
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CmaesConstants:
    """Strategy constants: population/parent sizes, recombination weights
    and the learning rates for the two evolution paths and the covariance."""

    lam: int
    mu: int
    weights: np.ndarray
    mu_w: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c1: float
    c_mu: float
    alpha: float
    chi_n: float

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class CmaesState:
    """The five evolving state variables plus the constants at iteration k."""

    m: np.ndarray
    sigma: float
    c: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    k: int
    constants: CmaesConstants


@dataclass(frozen=True)
class Objective:
    """A deterministic scalar function to minimize, with optional box bounds
    given as a (low, high) pair of length-``dim`` arrays."""

    eval: object
    dim: int
    bounds: tuple | None = None


@dataclass(frozen=True)
class CmaesIterate:
    """One trace entry: iteration counter, best value seen so far, current
    step-size, the post-update mean, cumulative evaluations and the
    population size in force (full state attached on request)."""

    k: int
    best_f: float
    sigma: float
    mean: tuple
    evals: int
    lam: int
    state: CmaesState | None = None


def default_constants(n: int, lam: int | None = None) -> CmaesConstants:
    """Standard strategy constants for dimension ``n``.

    λ defaults to 4 + ⌊3 ln n⌋; μ = ⌊λ/2⌋; w_i ∝ ln(μ + 1/2) − ln i,
    normalized to sum to one. Learning rates: c_σ = 3/(n+3) (≈ n/3
    horizon), c_c = 4/(n+4) (≈ n/4 horizon), c₁ = 2/(n+1.3)² (≈ 2/n²),
    c_μ = min(μ_w/n², 1 − c₁), d_σ = 1 + c_σ, α = 1.5, and
    E‖N(0,I)‖ ≈ √n (1 − 1/(4n) + 1/(21n²)).
    """
    if n < 1:
        raise ValueError("dimension must be at least 1")
    if lam is None:
        lam = 4 + int(3.0 * math.log(n))
    if lam < 2:
        raise InvalidPopulation(f"population size must be >= 2, got {lam}")
    mu = lam // 2
    raw = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_w = 1.0 / float((weights ** 2).sum())
    c_sigma = 3.0 / (n + 3.0)
    c_c = 4.0 / (n + 4.0)
    c1 = 2.0 / (n + 1.3) ** 2
    c_mu = min(mu_w / n ** 2, 1.0 - c1)
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n ** 2))
    return CmaesConstants(lam=lam, mu=mu, weights=weights, mu_w=mu_w,
                          c_sigma=c_sigma, d_sigma=1.0 + c_sigma, c_c=c_c,
                          c1=c1, c_mu=c_mu, alpha=1.5, chi_n=chi_n)


def _draw_population(rng, m, sigma, vecs, sqrt_vals, lam, n, bounds):
    """Sample λ candidates; out-of-bounds draws are resampled up to 100
    times, then clamped coordinate-wise."""
    zs = rng.standard_normal((lam, n))
    xs = m + sigma * (zs * sqrt_vals) @ vecs.T
    if bounds is not None:
        lo, hi = bounds
        for i in range(lam):
            tries = 0
            while (np.any(xs[i] < lo) or np.any(xs[i] > hi)) and tries < 100:
                zi = rng.standard_normal(n)
                xs[i] = m + sigma * vecs @ (sqrt_vals * zi)
                tries += 1
            np.clip(xs[i], lo, hi, out=xs[i])
    return xs


def cmaes_minimize(obj: Objective, init_mean, init_sigma, *, seed: int = 0,
                   max_iter: int = 1000, lam: int | None = None,
                   tol_mean: float = 1e-12, max_evals: int | None = None,
                   record_state: bool = False) -> tuple:
    """Minimize ``obj`` by covariance matrix adaptation; returns
    (best_x, best_f, trace).

    Each iteration samples x_i ~ N(m, σ²C), ranks candidates by value
    (stable sort, non-finite mapped to +inf and counted), recombines the
    best μ with the log-rank weights, updates the isotropic and
    anisotropic evolution paths, adapts σ by CSA and C by the rank-one
    plus rank-μ update. Stops when the mean displacement drops below
    ``tol_mean``, ``max_iter`` iterations are done, or another generation
    would exceed ``max_evals``. Deterministic for a fixed seed (Philox
    counter-based generator); only candidate *ranks* influence the
    iterate sequence.
    """
    n = obj.dim
    consts = default_constants(n, lam)
    lam_, mu = consts.lam, consts.mu
    w = consts.weights
    rng = np.random.Generator(np.random.Philox(seed))

    m = np.array(init_mean, dtype=float).reshape(n)
    sigma = float(init_sigma)
    if sigma <= 0.0:
        raise ValueError("init_sigma must be positive")
    cov = np.eye(n)
    p_sigma = np.zeros(n)
    p_c = np.zeros(n)

    best_x = m.copy()
    best_f = math.inf
    evals = 0
    trace: list[CmaesIterate] = []

    for k in range(1, max_iter + 1):
        if max_evals is not None and evals + lam_ > max_evals:
            break
        cov = 0.5 * (cov + cov.T)
        vals, vecs = np.linalg.eigh(cov)
        floor = 1e-14 * float(np.trace(cov))
        if float(vals.min()) < floor:
            warnings.warn(
                f"search covariance lost positive definiteness at iteration "
                f"{k} (min eigenvalue {vals.min():.4g}); floored at "
                f"{floor:.4g}", CovarianceRepairWarning, stacklevel=2)
            vals = np.maximum(vals, floor)
            cov = (vecs * vals) @ vecs.T
        sqrt_vals = np.sqrt(vals)

        xs = _draw_population(rng, m, sigma, vecs, sqrt_vals, lam_, n, obj.bounds)
        fvals = np.array([float(obj.eval(x)) for x in xs])
        evals += lam_
        keys = np.where(np.isfinite(fvals), fvals, math.inf)
        order = np.argsort(keys, kind="stable")
        if keys[order[0]] < best_f:
            best_f = float(keys[order[0]])
            best_x = xs[order[0]].copy()

        sel = xs[order[:mu]]
        m_new = w @ sel
        y = (m_new - m) / sigma
        # C^{-1/2} y via the eigendecomposition already in hand
        cinv_y = vecs @ ((vecs.T @ y) / sqrt_vals)
        p_sigma = ((1.0 - consts.c_sigma) * p_sigma
                   + math.sqrt((1.0 - (1.0 - consts.c_sigma) ** 2) * consts.mu_w)
                   * cinv_y)
        norm_ps = float(np.linalg.norm(p_sigma))
        h = 1.0 if norm_ps < consts.alpha * math.sqrt(n) else 0.0
        p_c = ((1.0 - consts.c_c) * p_c
               + h * math.sqrt((1.0 - (1.0 - consts.c_c) ** 2) * consts.mu_w) * y)
        c_s = (1.0 - h * h) * consts.c1 * consts.c_c * (2.0 - consts.c_c)
        ys = (sel - m) / sigma
        cov = ((1.0 - consts.c1 - consts.c_mu + c_s) * cov
               + consts.c1 * np.outer(p_c, p_c)
               + consts.c_mu * ys.T @ (w[:, None] * ys))
        sigma = sigma * math.exp((consts.c_sigma / consts.d_sigma)
                                 * (norm_ps / consts.chi_n - 1.0))
        shift = float(np.linalg.norm(m_new - m))
        m = m_new

        state = None
        if record_state:
            state = CmaesState(m=m.copy(), sigma=sigma, c=0.5 * (cov + cov.T),
                               p_sigma=p_sigma.copy(), p_c=p_c.copy(), k=k,
                               constants=consts)
        trace.append(CmaesIterate(k=k, best_f=best_f, sigma=sigma,
                                  mean=tuple(float(v) for v in m),
                                  evals=evals, lam=lam_, state=state))
        if shift < tol_mean:
            break
    return best_x, best_f, tuple(trace)


def restart_schedule(obj: Objective, budget: int, init_mean, init_sigma, *,
                     seed: int = 0, lam: int | None = None,
                     tol_mean: float = 1e-12) -> tuple:
    """Repeated runs with λ doubling each restart until the evaluation
    budget is exhausted; returns (best_x, best_f, traces), one trace per
    restart. Restart r uses seed ``seed + r``.
    """
    base = default_constants(obj.dim, lam).lam
    cur_lam = base
    spent = 0
    restart = 0
    best_x, best_f = None, math.inf
    traces = []
    while budget - spent >= cur_lam:
        x, f, trace = cmaes_minimize(
            obj, init_mean, init_sigma, seed=seed + restart,
            max_iter=10 ** 9, lam=cur_lam, tol_mean=tol_mean,
            max_evals=budget - spent)
        if trace:
            spent += trace[-1].evals
        else:
            break
        traces.append(trace)
        if f < best_f:
            best_x, best_f = x, f
        cur_lam *= 2
        restart += 1
    return best_x, best_f, tuple(traces)
