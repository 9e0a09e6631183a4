"""Self-contained statistical kernel.

Exact binomial test, one- and two-sample t-tests backed by a from-scratch
regularized incomplete beta function, Bonferroni correction, and the
composite bias guard applied to finished sessions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

_MAX_CF_ITER = 300
_CF_EPS = 3e-16
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0 <= x <= 1:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    """CDF of Student's t distribution with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 0.5
    p_tail = betainc(df / 2.0, 0.5, df / (df + t * t)) / 2.0
    return 1.0 - p_tail if t > 0 else p_tail


def _t_two_sided_p(t: float, df: float) -> float:
    if t == 0.0:
        return 1.0
    return min(1.0, betainc(df / 2.0, 0.5, df / (df + t * t)))


def _log_binom_pmf(k: int, n: int, p0: float) -> float:
    if p0 == 0.0:
        return 0.0 if k == 0 else -math.inf
    if p0 == 1.0:
        return 0.0 if k == n else -math.inf
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + k * math.log(p0) + (n - k) * math.log1p(-p0))


def binomial_test(k: int, n: int, p0: float = 0.5) -> float:
    """Exact two-sided binomial p-value.

    Sums the probabilities of all outcomes no more likely than the observed
    one (the point-probability method).
    """
    if not 0 <= k <= n or n < 1:
        raise ValueError("require 0 <= k <= n and n >= 1")
    if not 0 <= p0 <= 1:
        raise ValueError("p0 must lie in [0, 1]")
    log_obs = _log_binom_pmf(k, n, p0)
    # relative slack absorbs floating error for outcomes tied with k
    cutoff = log_obs + 1e-7
    total = 0.0
    for i in range(n + 1):
        lp = _log_binom_pmf(i, n, p0)
        if lp <= cutoff:
            total += math.exp(lp)
    return min(1.0, total)


class DegenerateSampleError(ValueError):
    """Sample too small or variance-degenerate for the requested test."""


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float
    degenerate: bool = False


# spread this far below the data scale is float rounding, not signal
_REL_TOL = 1e-12


def _mean_var(xs):
    n = len(xs)
    mean = math.fsum(xs) / n
    var = math.fsum((v - mean) ** 2 for v in xs) / (n - 1)
    scale = max(abs(v) for v in xs)
    if var < (_REL_TOL * scale) ** 2:
        var = 0.0
    return mean, var


def t_test_one_sample(samples, mu0: float) -> TTestResult:
    """Two-sided one-sample t-test against ``mu0``."""
    xs = [float(v) for v in samples]
    if len(xs) < 2:
        raise DegenerateSampleError("one-sample t-test needs at least 2 values")
    n = len(xs)
    mean, var = _mean_var(xs)
    if var == 0.0:
        scale = max(abs(mean), abs(mu0))
        if abs(mean - mu0) <= _REL_TOL * scale:
            return TTestResult(0.0, n - 1, 1.0, degenerate=True)
        return TTestResult(math.copysign(math.inf, mean - mu0), n - 1, 0.0,
                           degenerate=True)
    t = (mean - mu0) / math.sqrt(var / n)
    return TTestResult(t, n - 1, _t_two_sided_p(t, n - 1))


def t_test_two_sample(a, b) -> TTestResult:
    """Welch's unequal-variance two-sample t-test, two-sided."""
    xs = [float(v) for v in a]
    ys = [float(v) for v in b]
    if len(xs) < 2 or len(ys) < 2:
        raise DegenerateSampleError("two-sample t-test needs >= 2 values per group")
    na, nb = len(xs), len(ys)
    ma, va = _mean_var(xs)
    mb, vb = _mean_var(ys)
    if va == 0.0 and vb == 0.0:
        if abs(ma - mb) <= _REL_TOL * max(abs(ma), abs(mb)):
            return TTestResult(0.0, na + nb - 2, 1.0, degenerate=True)
        return TTestResult(math.copysign(math.inf, ma - mb), na + nb - 2, 0.0,
                           degenerate=True)
    se2 = va / na + vb / nb
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return TTestResult(t, df, _t_two_sided_p(t, df))


def bonferroni(p_values):
    """Multiply each p by the family size and clamp at 1."""
    ps = [float(p) for p in p_values]
    for p in ps:
        if not 0 <= p <= 1:
            raise ValueError("p-values must lie in [0, 1]")
    m = len(ps)
    return [min(1.0, p * m) for p in ps]


# ---------------------------------------------------------------------------
# bias guard
# ---------------------------------------------------------------------------

SIDE_BIAS = "SIDE_BIAS"
RT_ANOMALY = "RT_ANOMALY"


@dataclass
class BiasReport:
    side_counts: dict = field(default_factory=dict)
    binomial_p: float | None = None
    rt_test_p: float | None = None
    per_separation_table: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    excluded: bool = False
    alpha: float = 0.05

    def to_dict(self) -> dict:
        return {
            "side_counts": dict(self.side_counts),
            "binomial_p": self.binomial_p,
            "rt_test_p": self.rt_test_p,
            "per_separation_table": self.per_separation_table,
            "flags": list(self.flags),
            "excluded": self.excluded,
            "alpha": self.alpha,
        }


def run_bias_guard(trials, alpha: float = 0.05) -> BiasReport:
    """Composite post-session check: side preference, response-time anomaly,
    and a per-separation side-accuracy table for inspection.

    ``trials`` is a sequence with ``response``, ``target``, ``correct``,
    ``separation`` and ``response_time`` attributes (TrialRecord).
    For orientation tasks the "sides" are the two response orientations.
    """
    report = BiasReport(alpha=alpha)
    trials = list(trials)
    if not trials:
        return report

    options = sorted({t.target for t in trials} | {t.response for t in trials})
    counts = {opt: 0 for opt in options}
    for t in trials:
        counts[t.response] += 1
    report.side_counts = counts

    n = len(trials)
    k = counts[options[0]]
    report.binomial_p = binomial_test(k, n, 0.5)

    if len(options) == 2:
        rt_a = [t.response_time for t in trials if t.response == options[0]]
        rt_b = [t.response_time for t in trials if t.response == options[1]]
        if len(rt_a) >= 2 and len(rt_b) >= 2:
            report.rt_test_p = t_test_two_sample(rt_a, rt_b).p

    # alpha is a family level across both checks (Bonferroni)
    n_tests = 1 + (report.rt_test_p is not None)
    if report.binomial_p * n_tests < alpha:
        report.flags.append(SIDE_BIAS)
    if report.rt_test_p is not None and report.rt_test_p * n_tests < alpha:
        report.flags.append(RT_ANOMALY)

    table = {}
    for t in trials:
        sep = table.setdefault(f"{t.separation:g}", {})
        row = sep.setdefault(t.response, {"responses": 0, "correct": 0})
        row["responses"] += 1
        row["correct"] += int(t.correct)
    for sep in table.values():
        for row in sep.values():
            row["accuracy"] = row["correct"] / row["responses"]
    report.per_separation_table = table

    report.excluded = bool(report.flags)
    return report
