"""Population-size estimators for zero-truncated count data.

Every estimator returns an :class:`EstimateResult` with ``N_hat = f0_hat + n``
where ``n`` is the full observed total (counts above the truncation point are
added back unchanged). Estimation failures are reported as results with
``valid=False`` and a machine-readable ``reason`` instead of exceptions, so
that batch analyses always get one row per method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.special import digamma, gammaln

from .freq_model import FrequencyTable, ratio_points, truncate
from .inference import variance_wlrm
from .wls import Design, RegressionFit, WeightScheme, WLSError, wls_fit

__all__ = [
    "NBParams",
    "EstimateResult",
    "Reason",
    "default_cutoff",
    "implied_nb_params",
    "wlrm_estimate",
    "hm_estimate",
    "chao_estimate",
    "chao_bunge_estimate",
    "chao_bunge_tau",
    "ztnb_loglik",
    "ztnb_gradient",
    "ztnb_mle_estimate",
    "METHODS",
]


class Reason:
    """Failure reasons carried by invalid results."""

    TOO_FEW_POINTS = "TooFewPoints"
    NO_SINGLETONS = "NoSingletons"
    NO_DOUBLETONS = "NoDoubletons"
    NONPOSITIVE_TAU = "NonpositiveTau"
    IMPLIED_OUT_OF_RANGE = "ImpliedParamsOutOfRange"
    NONPOSITIVE_SLOPE = "NonpositiveSlope"
    OPTIMIZER_FAILED = "OptimizerFailed"
    BOUNDARY = "OptimizerFailed:boundary"
    INSUFFICIENT_DATA = "InsufficientData"
    INVALID_TRUNCATION = "InvalidTruncation"
    SINGULAR = "SingularFit"
    NONFINITE = "NonfiniteEstimate"


@dataclass(frozen=True)
class NBParams:
    """Negative binomial ``p(x) = G(x+k)/(G(x+1)G(k)) p^k (1-p)^x``."""

    k: float
    p: float

    def __post_init__(self):
        if not (self.k > 0 and 0 < self.p < 1):
            raise ValueError(f"invalid negative binomial parameters k={self.k}, p={self.p}")

    @property
    def mu(self) -> float:
        return self.k * (1 - self.p) / self.p

    @classmethod
    def from_mean(cls, mu: float, k: float) -> "NBParams":
        return cls(k=k, p=k / (k + mu))

    def pmf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        logp = (gammaln(x + self.k) - gammaln(self.k) - gammaln(x + 1)
                + self.k * math.log(self.p) + x * math.log1p(-self.p))
        return np.exp(logp)


@dataclass
class EstimateResult:
    method: str
    n_observed: float
    f0_hat: float
    N_hat: float
    m_used: int
    valid: bool = True
    reason: Optional[str] = None
    se: Optional[float] = None
    implied_nb: Optional[NBParams] = None
    fit: Optional[RegressionFit] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "n_observed": self.n_observed,
            "f0_hat": _json_float(self.f0_hat),
            "N_hat": _json_float(self.N_hat),
            "se": _json_float(self.se),
            "m_used": self.m_used,
            "valid": self.valid,
            "reason": self.reason,
            "implied_nb": None if self.implied_nb is None else
            {"k": self.implied_nb.k, "p": self.implied_nb.p, "mu": self.implied_nb.mu},
        }
        if self.fit is not None:
            out["fit"] = {
                "gamma_hat": self.fit.gamma_hat,
                "delta_hat": self.fit.delta_hat,
                "var_gamma": self.fit.var_gamma,
                "var_gamma_unscaled": float(self.fit.cov_unscaled[0, 0]),
                "dispersion": self.fit.dispersion,
                "scheme": self.fit.scheme.value,
                "n_points": self.fit.n_points,
            }
        out["extra"] = {k: _json_float(v) if isinstance(v, float) else v
                        for k, v in self.extra.items()}
        return out


def _json_float(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _invalid(method, t, m_used, reason, **kw) -> EstimateResult:
    kw.setdefault("f0_hat", math.nan)
    kw.setdefault("N_hat", math.nan)
    return EstimateResult(method=method, n_observed=t.n, m_used=m_used, valid=False,
                          reason=reason, **kw)


def default_cutoff(t: FrequencyTable) -> int:
    """First ``m >= 2`` with ``f_m > 0`` and ``f_{m+1} = 0`` (else ``max_count``)."""
    top = t.max_count
    for m in range(2, top):
        if t.f(m) > 0 and t.f(m + 1) == 0:
            return m
    return max(top, 2)


def _implied_nb(fit: RegressionFit):
    if fit.design is not Design.LINEAR:
        return None, "NotLinearDesign"
    if not fit.delta_hat > 0:
        return None, Reason.NONPOSITIVE_SLOPE
    k = 1.0 / fit.delta_hat
    p = 1.0 - math.exp(fit.gamma_hat) * fit.delta_hat
    if not (0 < p < 1) or not math.isfinite(k):
        return None, Reason.IMPLIED_OUT_OF_RANGE
    return NBParams(k=k, p=p), None


def implied_nb_params(fit: RegressionFit) -> Optional[NBParams]:
    """Invert ``gamma = log(1-p) + log k``, ``delta = 1/k``.

    Returns ``None`` when the slope is not positive (Poisson or binomial
    regime) or the implied ``p`` falls outside (0, 1).
    """
    return _implied_nb(fit)[0]


def _check_m(t: FrequencyTable, m: int) -> Optional[str]:
    if m < 2:
        raise ValueError(f"truncation point must be >= 2, got {m}")
    if t.tail and m > t.tail[0]:
        return Reason.INVALID_TRUNCATION
    return None


_MAX_LOG = 700.0


def _regression_estimate(method, t, m, scheme, design) -> EstimateResult:
    m = default_cutoff(t) if m is None else int(m)
    m_used = min(m, t.max_count)
    bad = _check_m(t, m)
    if bad:
        return _invalid(method, t, m_used, bad)
    f1 = t.f(1)
    if f1 <= 0:
        return _invalid(method, t, m_used, Reason.NO_SINGLETONS)
    pts = ratio_points(t, m)
    if len(pts) < 2:
        return _invalid(method, t, m_used, Reason.TOO_FEW_POINTS)
    try:
        fit = wls_fit(pts, t, scheme, design)
    except WLSError:
        return _invalid(method, t, m_used, Reason.SINGULAR)
    extra = {"skipped": list(pts.skipped)}
    n = t.n
    # log scale first: extreme fits must not overflow
    log_f0 = math.log(f1) - fit.gamma_hat
    if design is Design.HYPERBOLIC:
        log_f0 -= fit.delta_hat
    if not log_f0 < _MAX_LOG:
        return _invalid(method, t, m_used, Reason.NONFINITE, fit=fit)
    if design is Design.LINEAR:
        f0 = f1 * math.exp(-fit.gamma_hat)
        var_f0, var_N, se = variance_wlrm(fit, f1, n)
        nb, why = _implied_nb(fit)
        if why:
            extra["implied_nb_reason"] = why
        extra["se_unscaled"] = variance_wlrm(fit, f1, n, scaled=False)[2]
    else:
        f0 = math.exp(log_f0)
        se, nb = None, None
    if not math.isfinite(f0):
        return _invalid(method, t, m_used, Reason.SINGULAR, fit=fit)
    return EstimateResult(method=method, n_observed=n, f0_hat=f0, N_hat=f0 + n,
                          m_used=m_used, se=se, implied_nb=nb, fit=fit, extra=extra)


def wlrm_estimate(t: FrequencyTable, m: Optional[int] = None,
                  scheme=WeightScheme.DIAGONAL) -> EstimateResult:
    """Weighted log-linear ratio regression: ``f0_hat = f_1 exp(-gamma_hat)``.

    ``m=None`` uses :func:`default_cutoff`. The standard error comes from the
    conditioning/delta-method approximation in :func:`variance_wlrm`.
    """
    return _regression_estimate("WLRM", t, m, scheme, Design.LINEAR)


def hm_estimate(t: FrequencyTable, m: Optional[int] = None,
                scheme=WeightScheme.DIAGONAL) -> EstimateResult:
    """Hyperbolic-model variant: regress ``y_x - log(x+1)`` on ``1/(x+1)``.

    Prediction at ``x = 0`` gives ``f0_hat = f_1 / exp(gamma' + delta')``.
    """
    return _regression_estimate("HM", t, m, scheme, Design.HYPERBOLIC)


def chao_estimate(t: FrequencyTable) -> EstimateResult:
    """Chao lower bound ``n + f_1^2 / (2 f_2)``."""
    f1, f2 = t.f(1), t.f(2)
    if f2 <= 0:
        return _invalid("Chao", t, 2, Reason.NO_DOUBLETONS)
    f0 = f1 * f1 / (2.0 * f2)
    return EstimateResult(method="Chao", n_observed=t.n, f0_hat=f0, N_hat=t.n + f0, m_used=2)


def chao_bunge_tau(t: FrequencyTable, m: int) -> float:
    """Coverage-type estimate of ``P(X >= 2)`` from cells ``1..m``.

    ``tau = 1 - f_1 * sum(j^2 f_j) / (sum(j f_j))^2``.
    """
    j = np.arange(1, m + 1, dtype=float)
    f = t.dense(m)[1:]
    s1 = float(j @ f)
    s2 = float((j * j) @ f)
    return 1.0 - t.f(1) * s2 / (s1 * s1)


def chao_bunge_estimate(t: FrequencyTable, m: int = 10) -> EstimateResult:
    """Gamma-mixed Poisson estimator ``sum_{j=2}^m f_j / tau + n_{>m}``.

    A nonpositive ``tau`` marks the result invalid, but the raw value is kept
    in ``N_hat`` so that negative estimates can be tabulated.
    """
    m = int(m)
    m_used = min(m, t.max_count)
    bad = _check_m(t, m)
    if bad:
        return _invalid("ChaoBunge", t, m_used, bad)
    if t.counts[0] > m:
        return _invalid("ChaoBunge", t, m_used, Reason.INSUFFICIENT_DATA)
    head, tail_count = truncate(t, m)
    repeat = head.n - head.f(1)
    if head.f(1) <= 0 or repeat <= 0:
        return _invalid("ChaoBunge", t, m_used, Reason.INSUFFICIENT_DATA)
    tau = chao_bunge_tau(t, m)
    N = repeat / tau + tail_count if tau != 0 else math.copysign(math.inf, repeat)
    extra = {"tau_hat": tau}
    if tau <= 0:
        return _invalid("ChaoBunge", t, m_used, Reason.NONPOSITIVE_TAU,
                        N_hat=N, f0_hat=N - t.n, extra=extra)
    return EstimateResult(method="ChaoBunge", n_observed=t.n, f0_hat=N - t.n, N_hat=N,
                          m_used=m_used, extra=extra)


# -- zero-truncated negative binomial maximum likelihood ------------------

_LOGK_BOUNDS = (-7.0, 7.0)
_LOGIT_BOUNDS = (-15.0, 15.0)
_STARTS = [(k, p) for k in (0.25, 1.0, 4.0) for p in (0.3, 0.7)]


def _cells(t: FrequencyTable, m: int):
    head, _ = truncate(t, m)
    return head.counts.astype(float), head.freqs


def ztnb_loglik(k: float, p: float, x, f) -> float:
    """Zero-truncated NB log-likelihood of cells ``x`` with frequencies ``f``."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if not (k > 0 and 0 < p < 1):
        return -math.inf
    S = f.sum()
    log_nonzero = math.log(-math.expm1(k * math.log(p)))
    terms = (gammaln(x + k) - gammaln(k) - gammaln(x + 1)
             + k * math.log(p) + x * math.log1p(-p))
    return float(f @ terms - S * log_nonzero)


def ztnb_gradient(k: float, p: float, x, f) -> np.ndarray:
    """Gradient of :func:`ztnb_loglik` with respect to ``(k, p)``."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    S = f.sum()
    pk = math.exp(k * math.log(p))
    odds = pk / -math.expm1(k * math.log(p))
    d_k = float(f @ (digamma(x + k) - digamma(k))) + S * math.log(p) * (1 + odds)
    d_p = S * k / p - float(f @ x) / (1 - p) + S * k * odds / p
    return np.array([d_k, d_p])


def _to_natural(theta):
    return math.exp(theta[0]), 1.0 / (1.0 + math.exp(-theta[1]))


def _theta_gradient(theta, x, f):
    k, p = _to_natural(theta)
    g = ztnb_gradient(k, p, x, f)
    return np.array([g[0] * k, g[1] * p * (1 - p)])


def _on_boundary(theta, tol=1e-3) -> bool:
    return (theta[0] - _LOGK_BOUNDS[0] < tol or _LOGK_BOUNDS[1] - theta[0] < tol
            or theta[1] - _LOGIT_BOUNDS[0] < tol or _LOGIT_BOUNDS[1] - theta[1] < tol)


def _newton_polish(theta, x, f, steps=20):
    """A few safeguarded Newton steps on the transformed parameters."""
    nll = lambda th: -ztnb_loglik(*_to_natural(th), x, f)
    for _ in range(steps):
        g = _theta_gradient(theta, x, f)
        if np.linalg.norm(g) < 1e-9:
            break
        h = 1e-5
        H = np.empty((2, 2))
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            H[:, i] = (_theta_gradient(theta + e, x, f) - _theta_gradient(theta - e, x, f)) / (2 * h)
        H = 0.5 * (H + H.T)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.linalg.eigvalsh(H) < 0):
            # Hessian not negative definite: take a short ascent step instead
            step = g / max(np.linalg.norm(g), 1.0) * 1e-2
        base = nll(theta)
        t_ = 1.0
        while t_ > 1e-8:
            cand = theta + t_ * step
            if nll(cand) <= base + 1e-12 * abs(base):
                theta = cand
                break
            t_ *= 0.5
        else:
            break
    return theta


def ztnb_mle_estimate(t: FrequencyTable, m: Optional[int] = None, min_total: float = 10,
                      start: Optional[NBParams] = None) -> EstimateResult:
    """Maximum likelihood under the zero-truncated negative binomial.

    Multi-start bounded Nelder-Mead in ``(log k, logit p)`` followed by Newton
    polishing. ``N_hat = S / (1 - p^k) + n_{>m}`` where ``S`` is the number of
    units with counts ``<= m``. Optima on the search box edge are reported as
    invalid.
    """
    m = t.max_count if m is None else int(m)
    m_used = min(m, t.max_count)
    bad = _check_m(t, m)
    if bad:
        return _invalid("ZTNB_ML", t, m_used, bad)
    if t.counts[0] > m:
        return _invalid("ZTNB_ML", t, m_used, Reason.INSUFFICIENT_DATA)
    head, tail_count = truncate(t, m)
    x, f = head.counts.astype(float), head.freqs
    if len(x) < 2 or f.sum() < min_total:
        return _invalid("ZTNB_ML", t, m_used, Reason.INSUFFICIENT_DATA)

    def nll(theta):
        val = ztnb_loglik(*_to_natural(theta), x, f)
        return -val if math.isfinite(val) else 1e300

    starts = [(math.log(k), math.log(p / (1 - p))) for k, p in _STARTS]
    if start is not None:
        starts.append((math.log(start.k), math.log(start.p / (1 - start.p))))
    bounds = [_LOGK_BOUNDS, _LOGIT_BOUNDS]
    best = None
    for s in starts:
        s = np.clip(s, [b[0] for b in bounds], [b[1] for b in bounds])
        res = optimize.minimize(nll, s, method="Nelder-Mead", bounds=bounds,
                                options={"xatol": 1e-10, "fatol": 1e-10 * max(1.0, f.sum()),
                                         "maxiter": 2000, "maxfev": 4000})
        if best is None or res.fun < best.fun:
            best = res
    theta = best.x
    if _on_boundary(theta):
        k, p = _to_natural(theta)
        return _invalid("ZTNB_ML", t, m_used, Reason.BOUNDARY, extra={"k": k, "p": p})
    theta = _newton_polish(np.array(theta, dtype=float), x, f)
    k, p = _to_natural(theta)
    ll = ztnb_loglik(k, p, x, f)
    grad = _theta_gradient(theta, x, f)
    extra = {"k": k, "p": p, "loglik": ll, "grad_norm": float(np.linalg.norm(grad))}
    if not math.isfinite(ll) or _on_boundary(theta):
        return _invalid("ZTNB_ML", t, m_used, Reason.OPTIMIZER_FAILED, extra=extra)
    p0 = math.exp(k * math.log(p))
    S = f.sum()
    N = S / -math.expm1(k * math.log(p)) + tail_count
    if not math.isfinite(N):
        return _invalid("ZTNB_ML", t, m_used, Reason.OPTIMIZER_FAILED, extra=extra)
    extra["p0"] = p0
    return EstimateResult(method="ZTNB_ML", n_observed=t.n, f0_hat=N - t.n, N_hat=N,
                          m_used=m_used, implied_nb=NBParams(k, p), extra=extra)


METHODS = {
    "wlrm": "WLRM",
    "hm": "HM",
    "chao": "Chao",
    "chao-bunge": "ChaoBunge",
    "ztnb-ml": "ZTNB_ML",
}
