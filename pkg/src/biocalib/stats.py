"""Significance testing and result-table rendering for repeated runs.

Two-sided Student t-tests (paired) and Welch t-tests (unpaired, unequal
variances) with the t-distribution tail computed through an internal
regularized incomplete beta function. Tables mark the best model per metric
and every model statistically indistinguishable from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_ALPHA = 0.05

FLAG_BEST = "best"
FLAG_INDISTINGUISHABLE = "indistinguishable"
FLAG_PLAIN = "plain"

# canonical column order for rendered tables
METRIC_ORDER = ("ECE", "ACE", "BS", "BCE", "AUC", "ACC")

_MAX_CF_ITER = 300
_CF_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    # Continued fraction for the incomplete beta function, modified Lentz.
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b): cumulative density of the Beta(a, b) distribution at x."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T_df| >= |t|), exact through the incomplete beta identity."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if not np.isfinite(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def t_cdf(t: float, df: float) -> float:
    """Cumulative distribution of Student's t with df degrees of freedom."""
    p = t_two_sided_p(t, df)
    return 1.0 - 0.5 * p if t >= 0 else 0.5 * p


def paired_ttest(a, b) -> float:
    """Two-sided p-value of the paired Student t-test on a - b.

    Pairs match by index. Zero-variance differences yield p = 1 when the mean
    difference is zero and p = 0 (reported below 1e-12) otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired test needs equal-length samples")
    n = a.size
    if n < 2:
        raise ValueError("paired test needs at least 2 pairs")
    d = a - b
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / math.sqrt(n))
    return t_two_sided_p(t, n - 1)


def unpaired_ttest(a, b) -> float:
    """Two-sided Welch t-test (unequal variances, Welch-Satterthwaite df)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("unpaired test needs at least 2 values per group")
    m1, m2 = float(np.mean(a)), float(np.mean(b))
    v1, v2 = float(np.var(a, ddof=1)), float(np.var(b, ddof=1))
    se2 = v1 / a.size + v2 / b.size
    if se2 == 0.0:
        return 1.0 if m1 == m2 else 0.0
    t = (m1 - m2) / math.sqrt(se2)
    df = se2 * se2 / ((v1 / a.size) ** 2 / (a.size - 1) + (v2 / b.size) ** 2 / (b.size - 1))
    return t_two_sided_p(t, df)


@dataclass
class RepeatResults:
    """Per-repeat metric values for one model.

    `family` groups models that derive from the same base repeats (so a
    paired test applies between them); models from different families, or
    with different repeat counts, are compared with the unpaired test.
    """

    model: str
    metric: str
    values: np.ndarray
    direction: str  # "minimize" | "maximize"
    family: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("repeat values must be finite")
        if self.direction not in ("minimize", "maximize"):
            raise ValueError("direction must be 'minimize' or 'maximize'")

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def sd(self) -> float:
        # sample standard deviation (n-1); zero for a single repeat
        return float(np.std(self.values, ddof=1)) if self.values.size > 1 else 0.0


def mark_best(results, alpha: float = DEFAULT_ALPHA) -> dict:
    """Flag each model as best / indistinguishable / plain for one metric.

    The best model has the best repeat mean in the metric's direction; every
    other model is tested against it (paired within a family at equal repeat
    counts, Welch otherwise) and flagged indistinguishable when p >= alpha.
    """
    results = list(results)
    if not results:
        raise ValueError("need at least one model")
    directions = {r.direction for r in results}
    if len(directions) != 1:
        raise ValueError("all results must share one direction")
    sign = 1.0 if results[0].direction == "minimize" else -1.0
    best = min(results, key=lambda r: sign * r.mean)
    flags = {}
    for r in results:
        if r is best:
            flags[r.model] = FLAG_BEST
            continue
        if r.values.size < 2 or best.values.size < 2:
            flags[r.model] = FLAG_PLAIN
            continue
        if (r.family is not None and r.family == best.family
                and r.values.size == best.values.size):
            p = paired_ttest(r.values, best.values)
        else:
            p = unpaired_ttest(r.values, best.values)
        flags[r.model] = FLAG_INDISTINGUISHABLE if p >= alpha else FLAG_PLAIN
    return flags


def _cell(mean: float, sd: float) -> str:
    return f"{mean:.4f} ± {sd:.4f}"


def render_table(results_by_target: dict, fmt: str = "markdown",
                 alpha: float = DEFAULT_ALPHA) -> str:
    """Render mean +/- sd entries with significance annotations.

    `results_by_target` maps a target label to a list of RepeatResults
    (several models x several metrics). Markdown marks the best cell as
    `**_value_**` and indistinguishable cells as `**value**`; CSV emits long
    rows `target,model,metric,mean,sd,flag` that re-parse to the same
    4-decimal numbers.
    """
    if fmt not in ("markdown", "csv"):
        raise ValueError("format must be 'markdown' or 'csv'")
    lines = []
    if fmt == "csv":
        lines.append("target,model,metric,mean,sd,flag")
    for target, results in results_by_target.items():
        metrics = [m for m in METRIC_ORDER if any(r.metric == m for r in results)]
        extra = sorted({r.metric for r in results} - set(METRIC_ORDER))
        metrics += extra
        models = []
        for r in results:
            if r.model not in models:
                models.append(r.model)
        flags = {}
        for metric in metrics:
            group = [r for r in results if r.metric == metric]
            flags[metric] = mark_best(group, alpha=alpha)
        by_key = {(r.model, r.metric): r for r in results}
        if fmt == "markdown":
            lines.append(f"### {target}")
            lines.append("")
            lines.append("| Model | " + " | ".join(metrics) + " |")
            lines.append("|" + "---|" * (len(metrics) + 1))
            for model in models:
                cells = []
                for metric in metrics:
                    r = by_key.get((model, metric))
                    if r is None:
                        cells.append("")
                        continue
                    text = _cell(r.mean, r.sd)
                    flag = flags[metric].get(model, FLAG_PLAIN)
                    if flag == FLAG_BEST:
                        text = f"**_{text}_**"
                    elif flag == FLAG_INDISTINGUISHABLE:
                        text = f"**{text}**"
                    cells.append(text)
                lines.append(f"| {model} | " + " | ".join(cells) + " |")
            lines.append("")
        else:
            for model in models:
                for metric in metrics:
                    r = by_key.get((model, metric))
                    if r is None:
                        continue
                    flag = flags[metric].get(model, FLAG_PLAIN)
                    lines.append(f"{target},{model},{metric},{r.mean:.4f},{r.sd:.4f},{flag}")
    return "\n".join(lines) + "\n"
