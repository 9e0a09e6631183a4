"""Cohort aggregation: mean curves with SE bands, threshold-level
extraction, and significance comparison against a static-stimulus
reference curve.

The bundled reference curve is a synthetic fixture anchored to published
summary values (0.9 crossing at 20.7 mm, steep transition); it exists to
exercise the pipeline, not to reproduce physiology.  A digitized curve can
be loaded from a two-column CSV instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .psymodel import NOT_REACHED, CurveSamples, NonMonotoneCurveError, invert_curve
from .stats import DegenerateSampleError, bonferroni, t_test_one_sample

THRESHOLD_LEVELS = (0.75, 0.80, 0.85, 0.90, 0.95)

FIXTURE_NAME = "static_2pod_reference.csv"


@dataclass(frozen=True)
class ReferenceCurve:
    label: str
    x_values: np.ndarray
    y_values: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        curve = CurveSamples(self.x_values, self.y_values)
        object.__setattr__(self, "x_values", curve.x_values)
        object.__setattr__(self, "y_values", curve.y_values)
        if self.x_values[0] > 2.5 or self.x_values[-1] < 45.0:
            raise ValueError("reference curve must span at least [2.5, 45] mm")

    def interp(self, x):
        return np.interp(x, self.x_values, self.y_values)

    def as_samples(self) -> CurveSamples:
        return CurveSamples(self.x_values, self.y_values)


@dataclass
class ThresholdReport:
    levels: tuple
    separations: list  # mm, or NOT_REACHED
    se: list | None = None

    def reached(self) -> dict:
        return {lv: sep for lv, sep in zip(self.levels, self.separations)
                if sep is not NOT_REACHED}


@dataclass
class ComparisonReport:
    x_values: np.ndarray
    t_values: list
    p_values: list
    p_bonferroni: list
    significant: list
    degenerate: list
    alpha: float = 0.05


def cohort_mean(curves) -> CurveSamples:
    """Pointwise sample mean with standard error across participants."""
    curves = list(curves)
    if len(curves) < 2:
        raise ValueError("cohort mean needs at least 2 curves")
    x0 = curves[0].x_values
    for c in curves[1:]:
        if c.x_values.shape != x0.shape or not np.allclose(c.x_values, x0):
            raise ValueError("curves must share one x grid")
    ys = np.stack([c.y_values for c in curves])
    mean = ys.mean(axis=0)
    se = ys.std(axis=0, ddof=1) / np.sqrt(len(curves))
    return CurveSamples(x0, mean, se)


def extract_thresholds(curve: CurveSamples, levels=THRESHOLD_LEVELS) -> ThresholdReport:
    """Separation needed to reach each recognition level."""
    seps = [invert_curve(curve, lv) for lv in levels]
    return ThresholdReport(tuple(levels), seps)


def compare_to_reference(individual_curves, reference: ReferenceCurve, x_test,
                         alpha: float = 0.05) -> ComparisonReport:
    """One-sample t-test of participant curve values against the reference
    at every test separation, Bonferroni-corrected across separations."""
    curves = list(individual_curves)
    if len(curves) < 2:
        raise ValueError("comparison needs at least 2 individual curves")
    xs = np.asarray(x_test, dtype=float)
    ts, ps, degen = [], [], []
    for x in xs:
        samples = [float(c.interp(x)) for c in curves]
        ref = float(reference.interp(x))
        result = t_test_one_sample(samples, ref)
        ts.append(result.t)
        ps.append(result.p)
        degen.append(result.degenerate)
    p_corr = bonferroni(ps)
    sig = [p < alpha for p in p_corr]
    return ComparisonReport(xs, ts, ps, p_corr, sig, degen, alpha)


# ---------------------------------------------------------------------------
# reference fixture
# ---------------------------------------------------------------------------


def load_reference_curve(path, label: str = "reference", provenance: str = "") -> ReferenceCurve:
    """Two-column CSV loader: separation_mm,recognition_rate."""
    xs, ys = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "separation_mm":
            raise ValueError(f"unexpected reference header {header!r}")
        for row in reader:
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    return ReferenceCurve(label, np.asarray(xs), np.asarray(ys), provenance)


def builtin_reference_curve() -> ReferenceCurve:
    """The bundled synthetic static-stimulus fixture (pipeline testing only)."""
    path = resources.files("vibropsi").joinpath("data").joinpath(FIXTURE_NAME)
    with resources.as_file(path) as p:
        return load_reference_curve(
            p,
            label="static 2POD (synthetic fixture)",
            provenance=("Synthetic Weibull fixture anchored to published summary "
                        "values; not measured data."),
        )


# ---------------------------------------------------------------------------
# CSV export / import
# ---------------------------------------------------------------------------

_FMT = "{:.12g}"


def _fmt(v) -> str:
    if v is NOT_REACHED:
        return "NOT_REACHED"
    return _FMT.format(float(v))


def export_plot_data(artifact, path) -> Path:
    """Write an analysis artifact as CSV with documented headers."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(artifact, CurveSamples):
            if artifact.se_values is not None:
                writer.writerow(["separation_mm", "recognition_rate", "se"])
                for x, y, se in zip(artifact.x_values, artifact.y_values,
                                    artifact.se_values):
                    writer.writerow([_fmt(x), _fmt(y), _fmt(se)])
            else:
                writer.writerow(["separation_mm", "recognition_rate"])
                for x, y in zip(artifact.x_values, artifact.y_values):
                    writer.writerow([_fmt(x), _fmt(y)])
        elif isinstance(artifact, ThresholdReport):
            writer.writerow(["level", "separation_mm", "se"])
            se = artifact.se or [None] * len(artifact.levels)
            for lv, sep, s in zip(artifact.levels, artifact.separations, se):
                writer.writerow([_fmt(lv), _fmt(sep), "" if s is None else _fmt(s)])
        elif isinstance(artifact, ComparisonReport):
            writer.writerow(["separation_mm", "t", "p", "p_bonferroni",
                             "log10_p_bonferroni", "significant"])
            for x, t, p, pb, sig in zip(artifact.x_values, artifact.t_values,
                                        artifact.p_values, artifact.p_bonferroni,
                                        artifact.significant):
                log10p = "-inf" if pb == 0 else _fmt(np.log10(pb))
                writer.writerow([_fmt(x), _fmt(t), _fmt(p), _fmt(pb), log10p,
                                 int(sig)])
        else:
            raise TypeError(f"cannot export {type(artifact).__name__}")
    return path


def read_curve_csv(path) -> CurveSamples:
    """Round-trip reader for exported curves."""
    xs, ys, ses = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        has_se = len(header) > 2
        for row in reader:
            xs.append(float(row[0]))
            ys.append(float(row[1]))
            if has_se:
                ses.append(float(row[2]))
    return CurveSamples(np.asarray(xs), np.asarray(ys),
                        np.asarray(ses) if ses else None)


def read_threshold_csv(path) -> ThresholdReport:
    levels, seps, ses = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            levels.append(float(row[0]))
            seps.append(NOT_REACHED if row[1] == "NOT_REACHED" else float(row[1]))
            ses.append(None if len(row) < 3 or row[2] == "" else float(row[2]))
    se = None if all(s is None for s in ses) else ses
    return ThresholdReport(tuple(levels), seps, se)
