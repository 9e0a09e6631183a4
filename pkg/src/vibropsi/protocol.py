"""Session state machine for the 2IFC trial loops.

Wires the grid-Bayes selector to an apparatus and a responder (human or
simulated), owns all randomization (target draw, per-motor intensity
jitter, orientation coin flip) and record persistence under a TSID.

RNG draw order per session: orientation coin flip (if requested random),
then per trial: target, then per-motor duty jitter in fixed motor order.
This makes every transcript replay exactly from (config, seed, responses).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import bape
from .apparatus import (
    AlignmentFailedError,
    ApparatusConfig,
    Orientation,
    SimulatedApparatus,
    Task,
    TipLayout,
)
from .bape import CandidateSet, LikelihoodTable, Posterior
from .psymodel import EXPORT_X_GRID, GridConfig, build_grid
from .stats import run_bias_guard

SCHEMA_VERSION = 1


class Phase(str, enum.Enum):
    ALIGNING = "ALIGNING"
    BETWEEN_TRIALS = "BETWEEN_TRIALS"
    AWAITING_RESPONSE = "AWAITING_RESPONSE"
    REORIENTING = "REORIENTING"
    COMPLETE = "COMPLETE"
    EXCLUDED = "EXCLUDED"
    ABORTED = "ABORTED"


class SessionError(RuntimeError):
    pass


class WrongPhaseError(SessionError):
    pass


FIRST_A = "FIRST_A"
FIRST_B = "FIRST_B"


def response_options(task: Task):
    """The two 2IFC choices for a task."""
    if task is Task.VT2POD:
        return (Orientation.HORIZONTAL.value, Orientation.VERTICAL.value)
    return (FIRST_A, FIRST_B)


@dataclass(frozen=True)
class SessionConfig:
    task: Task
    tsid: str
    trials_per_block: int = 50
    seed: int = 0
    first_orientation: str = "RANDOM"  # HORIZONTAL | VERTICAL | RANDOM
    grid_config: GridConfig = field(default_factory=GridConfig)
    candidates: CandidateSet | None = None
    apparatus_config: ApparatusConfig = field(default_factory=ApparatusConfig)
    mean_duty: float = 80.0
    duty_jitter_sd: float = 3.0
    inter_stimulus_gap_ms: float = 500.0
    response_deadline_ms: float | None = None
    reveal_feedback: bool = False
    session_id: str | None = None

    def __post_init__(self):
        if not self.tsid:
            raise ValueError("tsid must be non-empty")
        if self.trials_per_block < 1:
            raise ValueError("trials_per_block must be >= 1")
        if self.first_orientation not in ("HORIZONTAL", "VERTICAL", "RANDOM"):
            raise ValueError(f"bad first_orientation {self.first_orientation!r}")
        if not 0 <= self.mean_duty <= 100:
            raise ValueError("mean_duty must lie in [0, 100]")
        object.__setattr__(self, "task", Task(self.task))

    @property
    def blocks(self) -> int:
        return 2 if self.task is Task.VT2PD_BIDIRECTIONAL else 1

    @property
    def total_trials(self) -> int:
        return self.blocks * self.trials_per_block

    def resolved_session_id(self) -> str:
        if self.session_id:
            return self.session_id
        return f"{self.tsid}-{self.task.value.lower()}-s{self.seed}"


@dataclass(frozen=True)
class TrialRecord:
    index: int  # 1-based
    block: int
    orientation: Orientation
    separation: float
    target: str
    response: str
    correct: bool
    response_time: float  # ms
    intensity_duties: dict  # motor id -> jittered duty percent

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "block": self.block,
            "orientation": self.orientation.value,
            "separation_mm": self.separation,
            "target": self.target,
            "response": self.response,
            "correct": self.correct,
            "response_time_ms": self.response_time,
            "intensity_duties": dict(self.intensity_duties),
        }


def jittered_duty(mean_duty: float, rng, sd: float = 3.0) -> float:
    """Gaussian intensity jitter around the nominal duty cycle, clamped."""
    if not 0 <= mean_duty <= 100:
        raise ValueError("mean duty must lie in [0, 100]")
    return float(min(100.0, max(0.0, rng.normal(mean_duty, sd))))


@dataclass
class PendingTrial:
    target: str
    separation: float
    orientation: Orientation
    block: int
    duties: dict
    stimulus_complete_ms: float


class Session:
    """One strictly serialized 2IFC session."""

    def __init__(self, config: SessionConfig, apparatus=None):
        self.config = config
        self.session_id = config.resolved_session_id()
        self.rng = np.random.default_rng(config.seed)
        self.apparatus = apparatus if apparatus is not None else SimulatedApparatus(
            config.apparatus_config, seed=config.seed + 1
        )
        self.grid = build_grid(config.grid_config)
        self.candidates = config.candidates or CandidateSet.default()
        self.table = LikelihoodTable(self.grid, self.candidates)
        self.posterior = Posterior.uniform(self.grid)
        self.history: list[TrialRecord] = []
        self.voided: list[dict] = []
        self.entropy_trace = [bape.entropy(self.posterior)]
        self.block = 1
        self.bias_report = None
        self.started_at_ms = self.apparatus.clock_ms
        self.finished_at_ms = None
        self._pending: PendingTrial | None = None

        if config.first_orientation == "RANDOM":
            self.orientation = (Orientation.HORIZONTAL if self.rng.integers(2) == 0
                                else Orientation.VERTICAL)
        else:
            self.orientation = Orientation(config.first_orientation)

        self.phase = Phase.ALIGNING
        self.alignment_report = self.apparatus.run_alignment_check(
            self.candidates.separations
        )
        self.next_separation = bape.select_next(self.posterior, self.candidates,
                                                self.table)
        self.phase = Phase.BETWEEN_TRIALS

    # -- queries -----------------------------------------------------------

    @property
    def options(self):
        return response_options(self.config.task)

    @property
    def done(self) -> bool:
        return len(self.history) >= self.config.total_trials

    def trials_in_block(self) -> int:
        return sum(1 for t in self.history if t.block == self.block)

    # -- trial loop --------------------------------------------------------

    def begin_trial(self) -> dict:
        """Deliver the next stimulus; returns what a participant may know."""
        if self.phase is not Phase.BETWEEN_TRIALS:
            raise WrongPhaseError(f"cannot start a trial in phase {self.phase.value}")
        sep = self.next_separation
        target = self.options[int(self.rng.integers(2))]
        layout = TipLayout.build(self.config.task, sep, self.orientation)

        self.apparatus.set_separation(sep)
        self.apparatus.lower_to_contact()
        duties = {}
        if self.config.task is Task.VT2POD:
            # apex always fires, paired with the motor matching the target
            paired = "H" if target == Orientation.HORIZONTAL.value else "V"
            for motor in ("C", paired):
                duties[motor] = jittered_duty(self.config.mean_duty, self.rng,
                                              self.config.duty_jitter_sd)
            self.apparatus.burst(["C", paired], [duties["C"], duties[paired]])
        else:
            # both sides fire exactly once; only the order carries the answer
            for motor in ("A", "B"):
                duties[motor] = jittered_duty(self.config.mean_duty, self.rng,
                                              self.config.duty_jitter_sd)
            order = ("A", "B") if target == FIRST_A else ("B", "A")
            self.apparatus.burst([order[0]], [duties[order[0]]])
            self.apparatus.wait(self.config.inter_stimulus_gap_ms)
            self.apparatus.burst([order[1]], [duties[order[1]]])
        self.apparatus.raise_rig()

        self._pending = PendingTrial(
            target=target,
            separation=sep,
            orientation=self.orientation,
            block=self.block,
            duties=duties,
            stimulus_complete_ms=self.apparatus.clock_ms,
        )
        self.phase = Phase.AWAITING_RESPONSE
        return {
            "separation_mm": sep,
            "orientation": self.orientation.value,
            "options": list(self.options),
            "layout": {m: list(p) for m, p in layout.positions.items()},
        }

    def submit_response(self, response: str, response_time_ms: float | None = None) -> TrialRecord:
        if self.phase is not Phase.AWAITING_RESPONSE or self._pending is None:
            raise WrongPhaseError(f"no response expected in phase {self.phase.value}")
        if response not in self.options:
            raise ValueError(f"response {response!r} not among {self.options}")
        pending = self._pending
        if response_time_ms is None:
            response_time_ms = self.apparatus.clock_ms - pending.stimulus_complete_ms
        correct = response == pending.target
        record = TrialRecord(
            index=len(self.history) + 1,
            block=pending.block,
            orientation=pending.orientation,
            separation=pending.separation,
            target=pending.target,
            response=response,
            correct=correct,
            response_time=float(response_time_ms),
            intensity_duties=pending.duties,
        )
        self.history.append(record)
        self.posterior = bape.update(self.posterior, pending.separation, correct,
                                     self.table)
        self.entropy_trace.append(bape.entropy(self.posterior))
        self._pending = None

        if self.done:
            self.phase = Phase.COMPLETE
        elif (self.config.task is Task.VT2PD_BIDIRECTIONAL and self.block == 1
              and self.trials_in_block() >= self.config.trials_per_block):
            self.phase = Phase.REORIENTING
        else:
            self.next_separation = bape.select_next(self.posterior, self.candidates,
                                                    self.table)
            self.phase = Phase.BETWEEN_TRIALS
        return record

    def void_pending(self, reason: str = "timeout") -> None:
        """Drop the pending trial (e.g. responder deadline); re-queue fresh."""
        if self.phase is not Phase.AWAITING_RESPONSE or self._pending is None:
            raise WrongPhaseError("no pending trial to void")
        self.voided.append({
            "after_index": len(self.history),
            "separation_mm": self._pending.separation,
            "reason": reason,
        })
        self._pending = None
        # posterior untouched; ask the selector again
        self.next_separation = bape.select_next(self.posterior, self.candidates,
                                                self.table)
        self.phase = Phase.BETWEEN_TRIALS

    def advance_block(self) -> None:
        """Rotate the rig 90 degrees between the two bidirectional blocks."""
        if self.phase is not Phase.REORIENTING:
            raise WrongPhaseError(f"cannot advance block in phase {self.phase.value}")
        self.orientation = self.orientation.toggled()
        self.apparatus.reorient(self.orientation)
        self.block = 2
        # the running posterior carries forward: reorientation is no evidence
        self.next_separation = bape.select_next(self.posterior, self.candidates,
                                                self.table)
        self.phase = Phase.BETWEEN_TRIALS

    def run_trial(self, responder) -> TrialRecord:
        """One full trial against a responder(separation, target, options) -> (response, rt_ms)."""
        stimulus = self.begin_trial()
        response, rt = responder(stimulus["separation_mm"], self._pending.target,
                                 self.options)
        return self.submit_response(response, rt)

    def run_to_completion(self, responder) -> None:
        while not self.done:
            if self.phase is Phase.REORIENTING:
                self.advance_block()
            self.run_trial(responder)

    # -- finish ------------------------------------------------------------

    def finalize(self, data_dir=None) -> dict:
        """Bias guard, postmean, and the persisted session record."""
        if not self.history:
            raise SessionError("cannot finalize a session with no trials")
        if self.phase not in (Phase.COMPLETE, Phase.EXCLUDED):
            raise SessionError(f"session not complete (phase {self.phase.value})")
        self.bias_report = run_bias_guard(self.history)
        if self.bias_report.excluded:
            self.phase = Phase.EXCLUDED
        self.finished_at_ms = self.apparatus.clock_ms
        record = self.to_record()
        if data_dir is not None:
            self.persist(record, data_dir)
        return record

    def abort(self, data_dir=None, reason: str = "aborted") -> dict:
        """Persist whatever was recorded and mark the session ABORTED."""
        self.phase = Phase.ABORTED
        self._pending = None
        self.bias_report = run_bias_guard(self.history)
        self.finished_at_ms = self.apparatus.clock_ms
        record = self.to_record()
        record["abort_reason"] = reason
        if data_dir is not None:
            self.persist(record, data_dir)
        return record

    def to_record(self) -> dict:
        curve = bape.postmean_curve(self.posterior, EXPORT_X_GRID)
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": self.session_id,
            "tsid": self.config.tsid,
            "phase": self.phase.value,
            "config": {
                "task": self.config.task.value,
                "trials_per_block": self.config.trials_per_block,
                "blocks": self.config.blocks,
                "seed": self.config.seed,
                "first_orientation": self.config.first_orientation,
                "resolved_first_orientation": (
                    self.history[0].orientation.value if self.history
                    else self.orientation.value),
                "candidates_mm": self.candidates.separations.tolist(),
                "grid": asdict(self.config.grid_config),
                "apparatus": {
                    "separation_range_mm": list(self.config.apparatus_config.separation_range),
                    "separation_tolerance_mm": self.config.apparatus_config.separation_tolerance,
                    "contact_force_n": self.config.apparatus_config.contact_force,
                    "force_tolerance": self.config.apparatus_config.force_tolerance,
                    "burst_duration_ms": self.config.apparatus_config.burst_duration_ms,
                    "nominal_frequency_hz": self.config.apparatus_config.nominal_frequency_hz,
                    "tip_diameter_mm": self.config.apparatus_config.tip_diameter_mm,
                },
                "mean_duty": self.config.mean_duty,
                "duty_jitter_sd": self.config.duty_jitter_sd,
                "inter_stimulus_gap_ms": self.config.inter_stimulus_gap_ms,
                "reveal_feedback": self.config.reveal_feedback,
            },
            "trials": [t.to_dict() for t in self.history],
            "voided": list(self.voided),
            "postmean": {
                "params_expectation": bape.expected_params(self.posterior),
                "curve_samples": {
                    "x_mm": curve.x_values.tolist(),
                    "y": curve.y_values.tolist(),
                },
            },
            "entropy_trace": list(self.entropy_trace),
            "bias_report": self.bias_report.to_dict() if self.bias_report else None,
            "alignment": self.alignment_report.to_dict(),
            "timestamps": {
                "started_at_ms": self.started_at_ms,
                "finished_at_ms": self.finished_at_ms,
            },
        }

    def persist(self, record: dict, data_dir) -> Path:
        path = record_path(data_dir, self.config.tsid, self.session_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_record(record))
        return path


def record_path(data_dir, tsid: str, session_id: str) -> Path:
    return Path(data_dir) / tsid / f"{session_id}.json"


def dump_record(record: dict) -> str:
    # sorted keys + default float repr keep identical sessions byte-identical
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


def load_record(path) -> dict:
    return json.loads(Path(path).read_text())


def start_session(config: SessionConfig, apparatus=None) -> Session:
    return Session(config, apparatus)
