"""Multivariate Gaussian value types and the matrix identities built on them.

Provides moment-form (:class:`Gaussian`), canonical-form
(:class:`CanonicalGaussian`) and block-partitioned
(:class:`PartitionedGaussian`) representations of a multivariate normal,
plus partitioned conditioning and a Woodbury-style inverse.

All covariance-like outputs are symmetrized as ``(M + M.T) / 2`` before
they are returned; inversion goes through a pivoted LU factorization and
raises :class:`SingularMatrix` when the smallest relative pivot drops
below ``PIVOT_RTOL``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

#: relative pivot below which a factorization is declared singular
PIVOT_RTOL = 1e-12
#: most negative eigenvalue tolerated in a "positive semi-definite" matrix
PSD_EIG_TOL = -1e-10


class SingularMatrix(np.linalg.LinAlgError):
    """An inverse was required of a matrix that failed the pivot test.

    The message names the offending matrix (e.g. ``"s22"``) so callers can
    tell which block of a larger computation broke.
    """

    def __init__(self, name: str, detail: str = ""):
        self.name = name
        msg = f"matrix '{name}' is singular to working precision"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric part (M + M.T) / 2 of a square matrix."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def _as_matrix(m, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {m.shape}")
    return m


def _as_vector(v, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {v.shape}")
    return v


def lu_factor_checked(a: np.ndarray, name: str):
    """Pivoted LU factorization that enforces the singularity threshold."""
    a = _as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    with warnings.catch_warnings():
        # scipy warns on exactly-zero pivots; our own error path covers it
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    scale = pivots.max(initial=0.0)
    if scale == 0.0 or pivots.min() < PIVOT_RTOL * scale:
        raise SingularMatrix(name)
    return lu, piv


def solve(a: np.ndarray, b: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Solve ``a @ x = b`` with the pivot-checked factorization."""
    fac = lu_factor_checked(a, name)
    return lu_solve(fac, np.asarray(b, dtype=float), check_finite=False)


def inv(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Pivot-checked matrix inverse."""
    a = _as_matrix(a, name)
    return solve(a, np.eye(a.shape[0]), name)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Gaussian:
    """Moment parameterization (mean, covariance) of a multivariate normal.

    The covariance is symmetrized on construction and must be positive
    semi-definite: eigenvalues below ``PSD_EIG_TOL`` raise ``ValueError``.
    Instances are immutable value objects and safe to share across threads.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_vector(self.mean, "mean")
        cov = symmetrize(_as_matrix(self.cov, "cov"))
        if cov.shape[0] != mean.shape[0]:
            raise ValueError(
                f"mean has dim {mean.shape[0]} but cov is {cov.shape}"
            )
        eig_min = float(np.linalg.eigvalsh(cov).min()) if cov.size else 0.0
        if eig_min < PSD_EIG_TOL:
            raise ValueError(
                f"covariance is not PSD (min eigenvalue {eig_min:.3e})"
            )
        object.__setattr__(self, "mean", _freeze(mean))
        object.__setattr__(self, "cov", _freeze(cov))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class CanonicalGaussian:
    """Canonical parameterization: information vector eta and precision lam.

    ``eta = cov^-1 @ mean`` and ``lam = cov^-1``. The precision matrix is
    symmetrized on construction; positive definiteness is only required
    when the object represents a proper (normalizable) distribution, so it
    is not enforced here.
    """

    eta: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        eta = _as_vector(self.eta, "eta")
        lam = symmetrize(_as_matrix(self.lam, "lam"))
        if lam.shape[0] != eta.shape[0]:
            raise ValueError(f"eta has dim {eta.shape[0]} but lam is {lam.shape}")
        object.__setattr__(self, "eta", _freeze(eta))
        object.__setattr__(self, "lam", _freeze(lam))

    @property
    def dim(self) -> int:
        return self.eta.shape[0]


@dataclass(frozen=True)
class PartitionedGaussian:
    """A joint normal over (Y1, Y2) stored in blocks.

    Fields are the mean blocks ``mu1``, ``mu2`` and covariance blocks
    ``s11``, ``s12``, ``s22`` (``s21 = s12.T`` is implied). The assembled
    full covariance must be symmetric PSD.
    """

    mu1: np.ndarray
    mu2: np.ndarray
    s11: np.ndarray
    s12: np.ndarray
    s22: np.ndarray

    def __post_init__(self):
        mu1 = _as_vector(self.mu1, "mu1")
        mu2 = _as_vector(self.mu2, "mu2")
        s11 = symmetrize(_as_matrix(self.s11, "s11"))
        s22 = symmetrize(_as_matrix(self.s22, "s22"))
        s12 = _as_matrix(self.s12, "s12")
        n1, n2 = mu1.shape[0], mu2.shape[0]
        if s11.shape != (n1, n1) or s22.shape != (n2, n2) or s12.shape != (n1, n2):
            raise ValueError("partition block shapes are inconsistent")
        full = np.block([[s11, s12], [s12.T, s22]])
        eig_min = float(np.linalg.eigvalsh(symmetrize(full)).min())
        if eig_min < PSD_EIG_TOL:
            raise ValueError(
                f"assembled covariance is not PSD (min eigenvalue {eig_min:.3e})"
            )
        for field, val in (("mu1", mu1), ("mu2", mu2), ("s11", s11),
                           ("s12", s12), ("s22", s22)):
            object.__setattr__(self, field, _freeze(val))


def condition(pg: PartitionedGaussian, a: np.ndarray) -> Gaussian:
    """Condition the first partition on an observed value of the second.

    Parameters
    ----------
    pg : PartitionedGaussian
        Joint distribution over (Y1, Y2).
    a : array_like
        Observed value for Y2; must have ``dim(a) == dim(mu2)``.

    Returns
    -------
    Gaussian
        N(mu1 + s12 s22^-1 (a - mu2), s11 - s12 s22^-1 s21).
    """
    a = _as_vector(a, "a")
    if a.shape[0] != pg.mu2.shape[0]:
        raise ValueError(f"observation has dim {a.shape[0]}, expected {pg.mu2.shape[0]}")
    gain = solve(pg.s22, np.column_stack([a - pg.mu2, pg.s12.T]), "s22")
    mean = pg.mu1 + pg.s12 @ gain[:, 0]
    cov = pg.s11 - pg.s12 @ gain[:, 1:]
    return Gaussian(mean, symmetrize(cov))


def to_canonical(g: Gaussian) -> CanonicalGaussian:
    """Convert moment form to canonical form (lam = cov^-1, eta = lam mean)."""
    lam = inv(g.cov, "covariance")
    return CanonicalGaussian(lam @ g.mean, symmetrize(lam))


def from_canonical(c: CanonicalGaussian) -> Gaussian:
    """Convert canonical form back to moment form (cov = lam^-1)."""
    cov = inv(c.lam, "lam")
    return Gaussian(cov @ c.eta, symmetrize(cov))


def woodbury_inverse(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Inverse of ``a + c @ b @ c.T`` without forming the sum.

    Evaluates ``a^-1 - a^-1 c (b^-1 + c.T a^-1 c)^-1 c.T a^-1``, which is
    cheap when ``b`` is much smaller than ``a``. Any singular factor raises
    :class:`SingularMatrix` naming the offending term.
    """
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    c = _as_matrix(c, "c")
    ai = inv(a, "a")
    bi = inv(b, "b")
    aic = ai @ c
    inner = bi + c.T @ aic
    return ai - aic @ solve(inner, aic.T, "inner term")
