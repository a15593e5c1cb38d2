"""Standard errors, goodness of fit and the parametric bootstrap."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaincc

from .freq_model import FrequencyTable
from .wls import RegressionFit, WeightScheme

__all__ = [
    "variance_wlrm",
    "chisq_pvalue",
    "GofResult",
    "fitted_frequencies",
    "gof_chisq",
    "BootstrapResult",
    "parametric_bootstrap",
    "replicate_rng",
]


def variance_wlrm(fit: RegressionFit, f1: float, n: float, scaled: bool = True):
    """Approximate variance of ``f0_hat`` and ``N_hat`` for the WLRM estimator.

    ``Var(f0) = exp(-gamma)^2 f1 (Var(gamma) f1 + 1)`` and
    ``Var(N) = n f0/N + Var(f0)``, with ``Var(n)`` estimated by ``n f0 / N``.

    Parameters
    ----------
    fit : RegressionFit
    f1 : float
        Number of singletons.
    n : float
        Observed number of units.
    scaled : bool
        Use the dispersion-scaled intercept variance (default) or the raw
        ``(X'WX)^{-1}`` entry.

    Returns
    -------
    var_f0, var_N, se_N : float
    """
    var_gamma = fit.var_gamma if scaled else float(fit.cov_unscaled[0, 0])
    e = math.exp(-fit.gamma_hat)
    f0 = f1 * e
    N = f0 + n
    var_f0 = e * e * f1 * (var_gamma * f1 + 1.0)
    var_N = n * f0 / N + var_f0
    return var_f0, var_N, math.sqrt(var_N)


def chisq_pvalue(chisq: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution.

    Evaluated as the regularized upper incomplete gamma ``Q(df/2, chisq/2)``.
    """
    if df < 1:
        raise ValueError("df must be >= 1")
    if chisq <= 0:
        return 1.0
    return float(gammaincc(0.5 * df, 0.5 * chisq))


@dataclass(frozen=True)
class GofResult:
    chisq: float
    df: int
    p_value: Optional[float]
    fitted: dict
    residuals: dict
    observed: dict
    gaps: tuple = ()

    def residual_rows(self):
        """``(x, observed, fitted, residual)`` rows for ``x = 1..m``."""
        return [(x, self.observed[x], self.fitted[x], r) for x, r in self.residuals.items()]


def fitted_frequencies(fit: RegressionFit, f1: float, m: int) -> np.ndarray:
    """``f_hat_0 .. f_hat_m`` from the ratio recursion anchored at ``f_hat_1 = f1``.

    ``f_hat_{x+1} = f_hat_x exp(y_hat_x) / (x + 1)``.
    """
    out = np.empty(m + 1)
    out[0] = f1 * math.exp(-float(fit.predict(0)))
    out[1] = f1
    for x in range(1, m):
        out[x + 1] = out[x] * math.exp(float(fit.predict(x))) / (x + 1)
    return out


def gof_chisq(t: FrequencyTable, fit: RegressionFit, m: Optional[int] = None) -> GofResult:
    """Pearson chi-square of observed against recursively fitted frequencies.

    Cells ``1..m`` all count, including gaps where ``f_x = 0``; ``df = m - 2``.
    """
    m = fit.m if m is None else int(m)
    f1 = t.f(1)
    if f1 <= 0:
        raise ValueError("goodness of fit requires f_1 > 0")
    fitted = fitted_frequencies(fit, f1, m)
    resid = {}
    for x in range(1, m + 1):
        resid[x] = (t.f(x) - fitted[x]) / math.sqrt(fitted[x])
    chisq = float(sum(r * r for r in resid.values()))
    df = m - 2
    p = chisq_pvalue(chisq, df) if df >= 1 else None
    gaps = tuple(x for x in range(1, m + 1) if t.f(x) == 0)
    return GofResult(chisq=chisq, df=df, p_value=p,
                     fitted={x: float(fitted[x]) for x in range(m + 1)},
                     residuals=resid,
                     observed={x: t.f(x) for x in range(1, m + 1)}, gaps=gaps)


def replicate_rng(seed: int, i: int) -> np.random.Generator:
    """Generator for replicate ``i``: Philox keyed by ``(seed, i)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(i)])))


@dataclass
class BootstrapResult:
    replicates: np.ndarray
    se: float
    percentile_ci: tuple
    B: int
    seed: int
    level: float = 0.95
    n_failed: int = 0
    flagged: bool = False
    notes: list = field(default_factory=list)


def parametric_bootstrap(t: FrequencyTable, m: Optional[int] = None,
                         scheme=WeightScheme.DIAGONAL, B: int = 1000, seed: int = 0,
                         level: float = 0.95) -> BootstrapResult:
    """Parametric bootstrap of the WLRM population size.

    Cell probabilities for ``x = 0..m`` are the recursively fitted
    frequencies normalised to sum to one. Each replicate draws
    ``round(N_hat) - n_{>m}`` units over those cells, drops the zero cell,
    re-attaches the observed counts above ``m`` unchanged and re-estimates.
    Failed replicates are dropped and counted; more than 20% failures sets
    ``flagged``.
    """
    from .estimators import default_cutoff, wlrm_estimate

    if B < 1:
        raise ValueError("B must be >= 1")
    m = default_cutoff(t) if m is None else int(m)
    base = wlrm_estimate(t, m, scheme)
    if not base.valid:
        raise ValueError(f"WLRM fit failed on the original data: {base.reason}")
    fitted = fitted_frequencies(base.fit, t.f(1), m)
    probs = fitted / fitted.sum()
    above = {x: f for x, f in t.entries.items() if x > m}
    tail = t.tail
    n_above = sum(above.values()) + (tail[1] if tail else 0.0)
    size = int(round(base.N_hat - n_above))

    values = []
    failed = 0
    for i in range(B):
        rng = replicate_rng(seed, i)
        draw = rng.multinomial(size, probs)
        cells = {x: int(draw[x]) for x in range(1, m + 1) if draw[x] > 0}
        cells.update(above)
        try:
            star = FrequencyTable(cells, tail)
        except ValueError:
            failed += 1
            continue
        res = wlrm_estimate(star, m, scheme)
        if res.valid and math.isfinite(res.N_hat):
            values.append(res.N_hat)
        else:
            failed += 1
    reps = np.asarray(values)
    se = float(reps.std(ddof=1)) if len(reps) > 1 else 0.0
    alpha = 0.5 * (1.0 - level)
    ci = ((float(np.quantile(reps, alpha)), float(np.quantile(reps, 1 - alpha)))
          if len(reps) else (math.nan, math.nan))
    flagged = failed > 0.2 * B
    notes = ["more than 20% of replicates failed"] if flagged else []
    return BootstrapResult(replicates=reps, se=se, percentile_ci=ci, B=B, seed=seed,
                           level=level, n_failed=failed, flagged=flagged, notes=notes)
