"""Two-parameter weighted least squares on ratio-plot points.

The weight matrix is the inverse of an estimated covariance of the log
ratios. Under a multinomial model for ``f_1..f_m`` the delta method gives a
tridiagonal covariance with diagonal ``1/f_x + 1/f_{x+1}`` and coupling
``-1/f_{x+1}`` between the log ratios at ``x`` and ``x+1``. The fit never forms
the inverse explicitly: it solves ``cov @ Z = [X | y]`` with the Thomas
algorithm and then a 2x2 system.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .freq_model import FrequencyTable, RatioPoints

__all__ = [
    "WeightScheme",
    "Design",
    "RegressionFit",
    "WLSError",
    "covariance_full",
    "covariance_diagonal",
    "solve_tridiagonal",
    "weighted_normal_solve",
    "design_matrix",
    "wls_fit",
]


class WLSError(ValueError):
    """The weighted regression cannot be formed or solved."""


class WeightScheme(str, enum.Enum):
    FULL = "full"
    DIAGONAL = "diag"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, value) -> "WeightScheme":
        if isinstance(value, cls):
            return value
        aliases = {"full": cls.FULL, "tridiagonal": cls.FULL, "diag": cls.DIAGONAL,
                   "diagonal": cls.DIAGONAL, "identity": cls.IDENTITY,
                   "unweighted": cls.IDENTITY, "none": cls.IDENTITY}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown weight scheme {value!r}") from None


class Design(str, enum.Enum):
    """Regressor/offset pairing.

    ``LINEAR``: ``y_x = gamma + delta * x``.
    ``HYPERBOLIC``: ``y_x - log(x+1) = gamma' + delta' / (x+1)``.
    """

    LINEAR = "linear"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class RegressionFit:
    gamma_hat: float
    delta_hat: float
    cov_params: np.ndarray
    cov_unscaled: np.ndarray
    dispersion: float
    residuals: np.ndarray
    x: np.ndarray
    y: np.ndarray
    scheme: WeightScheme
    design: Design
    m: int
    n_points: int

    @property
    def params(self) -> np.ndarray:
        return np.array([self.gamma_hat, self.delta_hat])

    @property
    def var_gamma(self) -> float:
        return float(self.cov_params[0, 0])

    def predict(self, x) -> np.ndarray:
        """Fitted log ratio ``log((x+1) f_{x+1}/f_x)`` at ``x``.

        For the hyperbolic design the offset ``log(x+1)`` is added back, so the
        value is always on the scale of the observed log ratios.
        """
        x = np.asarray(x, dtype=float)
        if self.design is Design.LINEAR:
            return self.gamma_hat + self.delta_hat * x
        return self.gamma_hat + self.delta_hat / (x + 1.0) + np.log(x + 1.0)


def _tridiagonal_parts(t: FrequencyTable, points: RatioPoints):
    xs = points.x
    fx = np.array([t.f(x) for x in xs])
    fx1 = np.array([t.f(x + 1) for x in xs])
    if np.any(fx <= 0) or np.any(fx1 <= 0):
        raise WLSError("covariance requires positive frequencies at every ratio point")
    diag = 1.0 / fx + 1.0 / fx1
    # log ratios at x and x+1 share f_{x+1}; non-adjacent points share nothing
    adjacent = np.diff(xs) == 1
    off = np.where(adjacent, -1.0 / fx1[:-1], 0.0)
    return diag, off


def covariance_full(t: FrequencyTable, points: RatioPoints) -> np.ndarray:
    """Delta-method covariance of the log ratios (tridiagonal)."""
    diag, off = _tridiagonal_parts(t, points)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def covariance_diagonal(t: FrequencyTable, points: RatioPoints) -> np.ndarray:
    """Diagonal part of :func:`covariance_full`."""
    diag, _ = _tridiagonal_parts(t, points)
    return np.diag(diag)


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Thomas algorithm for ``A @ z = rhs`` with ``A`` tridiagonal.

    ``lower[i] = A[i+1, i]``, ``upper[i] = A[i, i+1]``. ``rhs`` may be 1-D or
    2-D (one column per right-hand side). No pivoting, so ``A`` should be
    diagonally dominant or symmetric positive definite.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    b = np.array(diag, dtype=float)
    d = np.array(rhs, dtype=float)
    n = b.shape[0]
    if d.shape[0] != n or lower.shape[0] != n - 1 or upper.shape[0] != n - 1:
        raise ValueError("inconsistent tridiagonal system dimensions")
    c = np.zeros(max(n - 1, 0))
    if b[0] == 0:
        raise WLSError("zero pivot in tridiagonal solve")
    if n > 1:
        c[0] = upper[0] / b[0]
    d[0] = d[0] / b[0]
    for i in range(1, n):
        denom = b[i] - lower[i - 1] * c[i - 1]
        if denom == 0 or not np.isfinite(denom):
            raise WLSError("zero pivot in tridiagonal solve")
        if i < n - 1:
            c[i] = upper[i] / denom
        d[i] = (d[i] - lower[i - 1] * d[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        d[i] = d[i] - c[i] * d[i + 1]
    return d


def weighted_normal_solve(X, y, diag, off=None):
    """Solve the generalized least-squares problem with tridiagonal covariance.

    Parameters
    ----------
    X : (k, 2) array
    y : (k,) array
    diag, off : arrays
        Diagonal and first off-diagonal of the (symmetric) covariance whose
        inverse is the weight matrix. ``off=None`` means diagonal.

    Returns
    -------
    beta, xtwx_inv, residuals, weighted_rss
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    k = X.shape[0]
    if off is None:
        off = np.zeros(k - 1)
    rhs = np.column_stack([X, y])
    Z = solve_tridiagonal(off, diag, off, rhs)
    xtwx = X.T @ Z[:, :2]
    xtwy = X.T @ Z[:, 2]
    det = xtwx[0, 0] * xtwx[1, 1] - xtwx[0, 1] * xtwx[1, 0]
    scale = np.abs(xtwx).max()
    if not np.isfinite(det) or abs(det) <= 1e-14 * scale * scale:
        raise WLSError("singular weighted normal equations")
    xtwx = 0.5 * (xtwx + xtwx.T)
    inv = np.array([[xtwx[1, 1], -xtwx[0, 1]], [-xtwx[1, 0], xtwx[0, 0]]]) / det
    beta = inv @ xtwy
    resid = y - X @ beta
    wrss = float(resid @ solve_tridiagonal(off, diag, off, resid))
    return beta, inv, resid, wrss


def design_matrix(x, design: Design) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if design is Design.LINEAR:
        return np.column_stack([np.ones_like(x), x])
    return np.column_stack([np.ones_like(x), 1.0 / (x + 1.0)])


def wls_fit(points: RatioPoints, t: FrequencyTable, scheme=WeightScheme.DIAGONAL,
            design: Design = Design.LINEAR) -> RegressionFit:
    """Fit the log-ratio regression on ``points`` with weights from ``t``.

    ``cov_params`` is ``(X'WX)^{-1}`` times the weighted residual mean square
    (``n_points - 2`` denominator); with two points the fit is exact and the
    factor is 1.
    """
    scheme = WeightScheme.parse(scheme)
    design = Design(design)
    k = len(points)
    if k < 2:
        raise WLSError(f"need at least 2 ratio points, got {k}")
    y = points.y.astype(float)
    if design is Design.HYPERBOLIC:
        y = y - np.log(points.x + 1.0)
    X = design_matrix(points.x, design)

    if scheme is WeightScheme.IDENTITY:
        diag, off = np.ones(k), None
    else:
        diag, off = _tridiagonal_parts(t, points)
        if scheme is WeightScheme.DIAGONAL:
            off = None

    beta, inv, resid, wrss = weighted_normal_solve(X, y, diag, off)
    dispersion = wrss / (k - 2) if k > 2 else 1.0
    if k == 2:
        resid = np.zeros(2)
    return RegressionFit(
        gamma_hat=float(beta[0]),
        delta_hat=float(beta[1]),
        cov_params=inv * dispersion,
        cov_unscaled=inv,
        dispersion=float(dispersion),
        residuals=resid,
        x=points.x.copy(),
        y=y,
        scheme=scheme,
        design=design,
        m=points.source_m,
        n_points=k,
    )
