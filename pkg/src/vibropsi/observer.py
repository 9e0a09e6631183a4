"""Simulated participants for Monte Carlo validation of the pipeline."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .psymodel import WeibullParams, eval_weibull


class ObserverKind(str, enum.Enum):
    IDEAL = "IDEAL"
    FLAT = "FLAT"
    SIDE_BIASED = "SIDE_BIASED"
    CUSTOM = "CUSTOM"


@dataclass(frozen=True)
class RtModel:
    """Log-normal response-time model: median (ms) and log-space sigma."""

    median_ms: float = 900.0
    sigma: float = 0.4


@dataclass(frozen=True)
class ObserverModel:
    kind: ObserverKind
    truth: WeibullParams | None = None  # IDEAL
    flat_rate: float | None = None  # FLAT
    bias_side: str | None = None  # SIDE_BIASED: preferred response option
    bias_strength: float | None = None
    rt_model: RtModel = field(default_factory=RtModel)
    # optional preferred-side median shift so the response-time anomaly
    # detector has something to find
    bias_rt_shift_ms: float = 0.0
    custom_fn: object = None

    def __post_init__(self):
        if self.kind is ObserverKind.IDEAL and self.truth is None:
            raise ValueError("IDEAL observer needs a true psychometric function")
        if self.kind is ObserverKind.FLAT:
            if self.flat_rate is None or not 0 < self.flat_rate < 1:
                raise ValueError("FLAT observer needs flat_rate in (0, 1)")
        if self.kind is ObserverKind.SIDE_BIASED:
            if self.bias_side is None or self.bias_strength is None:
                raise ValueError("SIDE_BIASED observer needs side and strength")
            if not 0.5 <= self.bias_strength <= 1:
                raise ValueError("bias_strength must lie in [0.5, 1]")
        if self.kind is ObserverKind.CUSTOM and self.custom_fn is None:
            raise ValueError("CUSTOM observer needs a callable")


def _other(options, chosen):
    return options[1] if chosen == options[0] else options[0]


def respond(model: ObserverModel, separation: float, target: str, options, rng):
    """One simulated response: (choice, response_time_ms).

    Draw order is fixed (choice first, then response time) so transcripts
    replay exactly under a shared seed.
    """
    if model.kind is ObserverKind.CUSTOM:
        return model.custom_fn(separation, target, options, rng)

    if model.kind is ObserverKind.IDEAL:
        p = eval_weibull(model.truth, separation)
        response = target if rng.random() < p else _other(options, target)
    elif model.kind is ObserverKind.FLAT:
        response = target if rng.random() < model.flat_rate else _other(options, target)
    else:  # SIDE_BIASED
        preferred = model.bias_side
        if preferred not in options:
            raise ValueError(f"bias side {preferred!r} not among options {options}")
        response = preferred if rng.random() < model.bias_strength else _other(options, preferred)

    median = model.rt_model.median_ms
    if model.kind is ObserverKind.SIDE_BIASED and response == model.bias_side:
        median += model.bias_rt_shift_ms
    rt = median * math.exp(model.rt_model.sigma * rng.standard_normal())
    return response, rt


def from_config(cfg: dict) -> ObserverModel:
    """Build an observer from a plain config mapping (CLI / batch files)."""
    kind = ObserverKind(cfg["kind"])
    rt = RtModel(**cfg.get("rt_model", {}))
    truth = None
    if "truth" in cfg:
        truth = WeibullParams(**cfg["truth"])
    return ObserverModel(
        kind=kind,
        truth=truth,
        flat_rate=cfg.get("flat_rate"),
        bias_side=cfg.get("bias_side"),
        bias_strength=cfg.get("bias_strength"),
        rt_model=rt,
        bias_rt_shift_ms=cfg.get("bias_rt_shift_ms", 0.0),
    )
