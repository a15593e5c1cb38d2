"""Monte Carlo studies under a negative binomial population.

Populations are drawn by gamma-Poisson composition, zeros are discarded and
the configured estimators are applied to the remaining frequency table.
Replicate ``i`` of a study always uses ``replicate_rng(seed, i)``, so results
do not depend on evaluation order.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .estimators import (
    EstimateResult,
    NBParams,
    chao_bunge_estimate,
    chao_estimate,
    default_cutoff,
    hm_estimate,
    wlrm_estimate,
    ztnb_mle_estimate,
)
from .freq_model import FrequencyTable, FrequencyTableError
from .inference import replicate_rng
from .wls import WeightScheme

__all__ = [
    "EstimatorConfig",
    "StudySpec",
    "EstimatorSummary",
    "StudyReport",
    "sample_nb_counts",
    "sample_nb_population",
    "apply_estimator",
    "run_bias_study",
    "run_se_study",
    "run_study",
    "truncation_sweep",
    "load_study_specs",
    "reports_to_csv",
]

MRule = Union[str, int]


@dataclass(frozen=True)
class EstimatorConfig:
    """One estimator with its truncation rule and weights.

    ``m`` is ``"auto"`` (first gap), ``"max"`` (largest observed count) or an
    integer. Chao ignores ``m``.
    """

    method: str
    m: MRule = "auto"
    scheme: WeightScheme = WeightScheme.DIAGONAL

    @classmethod
    def parse(cls, text: str) -> "EstimatorConfig":
        """Parse ``method[:m[:scheme]]``, e.g. ``wlrm:auto:diag``."""
        parts = [p.strip() for p in text.split(":")]
        method = parts[0].lower()
        if method not in ("wlrm", "hm", "chao", "chao-bunge", "ztnb-ml"):
            raise ValueError(f"unknown estimator {parts[0]!r}")
        default_m = "max" if method in ("chao-bunge", "ztnb-ml") else "auto"
        m: MRule = parts[1] if len(parts) > 1 and parts[1] else default_m
        if m not in ("auto", "max"):
            m = int(m)
        scheme = WeightScheme.parse(parts[2]) if len(parts) > 2 else WeightScheme.DIAGONAL
        return cls(method, m, scheme)

    @property
    def label(self) -> str:
        if self.method == "chao":
            return "chao"
        if self.method in ("wlrm", "hm"):
            return f"{self.method}:{self.m}:{self.scheme.value}"
        return f"{self.method}:{self.m}"


@dataclass(frozen=True)
class StudySpec:
    N_true: int
    nb: NBParams
    replicates: int
    estimators: tuple
    seed: int = 0
    name: str = "study"
    kind: str = "bias"

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.N_true < 1:
            raise ValueError("N_true must be >= 1")
        if self.kind not in ("bias", "se"):
            raise ValueError(f"unknown study kind {self.kind!r}")
        object.__setattr__(self, "estimators", tuple(
            e if isinstance(e, EstimatorConfig) else EstimatorConfig.parse(e)
            for e in self.estimators))


@dataclass
class EstimatorSummary:
    label: str
    n_valid: int
    failure_count: int
    mean: Optional[float]
    bias: Optional[float]
    rmse: Optional[float]
    empirical_se: Optional[float]
    estimated_se: Optional[float] = None
    mean_estimated_se: Optional[float] = None
    values: np.ndarray = field(default=None, repr=False)


@dataclass
class StudyReport:
    spec: StudySpec
    summaries: dict

    def __getitem__(self, label) -> EstimatorSummary:
        return self.summaries[label]

    def rows(self) -> list:
        out = []
        for s in self.summaries.values():
            out.append({
                "study": self.spec.name,
                "N": self.spec.N_true,
                "k": self.spec.nb.k,
                "p": self.spec.nb.p,
                "mu": self.spec.nb.mu,
                "replicates": self.spec.replicates,
                "seed": self.spec.seed,
                "estimator": s.label,
                "n_valid": s.n_valid,
                "failures": s.failure_count,
                "mean": s.mean,
                "bias": s.bias,
                "rmse": s.rmse,
                "empirical_se": s.empirical_se,
                "estimated_se": s.estimated_se,
                "mean_estimated_se": s.mean_estimated_se,
            })
        return out


def sample_nb_counts(nb: NBParams, N: int, rng: np.random.Generator) -> np.ndarray:
    """``N`` iid negative binomial counts via a gamma-distributed Poisson rate."""
    rate = rng.gamma(shape=nb.k, scale=(1.0 - nb.p) / nb.p, size=N)
    return rng.poisson(rate)


def sample_nb_population(nb: NBParams, N: int, rng: np.random.Generator):
    """Draw a population of size ``N`` and tabulate the observed units.

    Returns
    -------
    table : FrequencyTable or None
        Nonzero counts; ``None`` when every unit was missed.
    f0 : int
        The number of unobserved units.
    """
    counts = sample_nb_counts(nb, N, rng)
    tally = np.bincount(counts)
    f0 = int(tally[0])
    cells = {x: int(c) for x, c in enumerate(tally) if x > 0 and c > 0}
    table = FrequencyTable(cells) if cells else None
    return table, f0


def _resolve_m(rule: MRule, t: FrequencyTable) -> int:
    if rule == "auto":
        return default_cutoff(t)
    if rule == "max":
        return max(t.max_count, 2)
    return int(rule)


def apply_estimator(cfg: EstimatorConfig, t: FrequencyTable) -> EstimateResult:
    if cfg.method == "chao":
        return chao_estimate(t)
    m = _resolve_m(cfg.m, t)
    if cfg.method == "wlrm":
        return wlrm_estimate(t, m, cfg.scheme)
    if cfg.method == "hm":
        return hm_estimate(t, m, cfg.scheme)
    if cfg.method == "chao-bunge":
        return chao_bunge_estimate(t, m)
    return ztnb_mle_estimate(t, m)


def _summarise(label, values, ses, failures, N_true) -> EstimatorSummary:
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return EstimatorSummary(label, 0, failures, None, None, None, None, values=v)
    err = v - N_true
    bias = float(err.mean())
    rmse = float(math.sqrt(np.mean(err * err)))
    emp = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    est = mean_se = None
    if ses:
        s = np.asarray(ses, dtype=float)
        est = float(math.sqrt(np.mean(s * s)))
        mean_se = float(s.mean())
    return EstimatorSummary(label, len(v), failures, float(v.mean()), bias, rmse, emp, est,
                            mean_se, v)


def run_study(spec: StudySpec) -> StudyReport:
    """Run every replicate of ``spec`` and summarise each estimator.

    Invalid estimates are excluded from bias/RMSE and counted as failures.
    ``estimated_se`` is the root of the mean plug-in variance (WLRM only);
    ``mean_estimated_se`` is the plain average of the plug-in standard errors.
    """
    labels = [e.label for e in spec.estimators]
    values = {lab: [] for lab in labels}
    ses = {lab: [] for lab in labels}
    failures = dict.fromkeys(labels, 0)
    for i in range(spec.replicates):
        table, _ = sample_nb_population(spec.nb, spec.N_true, replicate_rng(spec.seed, i))
        for cfg, lab in zip(spec.estimators, labels):
            if table is None:
                failures[lab] += 1
                continue
            try:
                res = apply_estimator(cfg, table)
            except (ValueError, FrequencyTableError):
                failures[lab] += 1
                continue
            if not res.valid or not math.isfinite(res.N_hat):
                failures[lab] += 1
                continue
            values[lab].append(res.N_hat)
            if res.se is not None:
                ses[lab].append(res.se)
    summaries = {lab: _summarise(lab, values[lab], ses[lab], failures[lab], spec.N_true)
                 for lab in labels}
    return StudyReport(spec, summaries)


def run_bias_study(spec: StudySpec) -> StudyReport:
    return run_study(spec)


def run_se_study(spec: StudySpec) -> StudyReport:
    """Compare the plug-in standard error with the spread of ``N_hat``."""
    return run_study(spec)


def truncation_sweep(t: FrequencyTable, methods: Sequence[str], m_values: Iterable[int],
                     scheme=WeightScheme.DIAGONAL) -> list:
    """Estimate at every truncation point; rows are ``(m, method, N_hat, valid)``.

    Invalid results keep their raw value (e.g. negative Chao-Bunge estimates)
    where one exists.
    """
    rows = []
    for m in m_values:
        if m < 3:
            raise ValueError("truncation sweep starts at m = 3")
        for method in methods:
            cfg = EstimatorConfig(method.lower(), int(m), WeightScheme.parse(scheme))
            res = apply_estimator(cfg, t)
            rows.append((int(m), cfg.method, res.N_hat, res.valid))
    return rows


def _nb_from_section(sec) -> NBParams:
    k = sec.getfloat("k")
    if k is None:
        raise ValueError("study config needs 'k'")
    if sec.get("p") is not None:
        return NBParams(k=k, p=sec.getfloat("p"))
    if sec.get("mu") is not None:
        return NBParams.from_mean(sec.getfloat("mu"), k)
    raise ValueError("study config needs 'p' or 'mu'")


def load_study_specs(source) -> list:
    """Read studies from an INI-style key/value config.

    Each section is one study; keys in ``[DEFAULT]`` are shared. Recognised
    keys: ``kind`` (bias|se), ``N``, ``k``, ``p`` or ``mu``, ``replicates``,
    ``seed``, ``estimators`` (comma-separated ``method[:m[:scheme]]``).
    """
    parser = configparser.ConfigParser()
    if hasattr(source, "read"):
        parser.read_file(source)
    elif isinstance(source, str) and "\n" in source:
        parser.read_string(source)
    else:
        with open(source, encoding="utf-8") as fh:
            parser.read_file(fh)
    specs = []
    for name in parser.sections():
        sec = parser[name]
        ests = [e for e in (s.strip() for s in sec.get("estimators", "wlrm").split(",")) if e]
        specs.append(StudySpec(
            N_true=sec.getint("N"),
            nb=_nb_from_section(sec),
            replicates=sec.getint("replicates", 1000),
            estimators=tuple(EstimatorConfig.parse(e) for e in ests),
            seed=sec.getint("seed", 0),
            name=name,
            kind=sec.get("kind", "bias"),
        ))
    return specs


CSV_FIELDS = ["study", "N", "k", "p", "mu", "replicates", "seed", "estimator", "n_valid",
              "failures", "mean", "bias", "rmse", "empirical_se", "estimated_se",
              "mean_estimated_se"]


def reports_to_csv(reports: Iterable[StudyReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rep in reports:
        for row in rep.rows():
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()
