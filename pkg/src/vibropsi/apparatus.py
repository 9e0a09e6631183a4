"""Abstract rig interface plus a simulator honoring the mechanical tolerances.

The simulator is the stand-in for the caliper/lifter hardware: separations
land within 0.2 mm of the command, contact force within 4% of 0.5 N, bursts
last 200 ms.  Time advances on a logical clock by default so large test
batteries run in seconds; a hardware port replaces only this module via the
line-based bridge protocol at the bottom.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np


class Task(str, enum.Enum):
    VT2PD = "VT2PD"
    VT2POD = "VT2POD"
    VT2PD_BIDIRECTIONAL = "VT2PD_BIDIRECTIONAL"


class Orientation(str, enum.Enum):
    HORIZONTAL = "HORIZONTAL"
    VERTICAL = "VERTICAL"

    def toggled(self) -> "Orientation":
        return Orientation.VERTICAL if self is Orientation.HORIZONTAL else Orientation.HORIZONTAL


class ApparatusError(RuntimeError):
    pass


class SeparationOutOfRangeError(ApparatusError):
    pass


class ContactTimeoutError(ApparatusError):
    pass


class NotInContactError(ApparatusError):
    pass


class AlignmentFailedError(ApparatusError):
    def __init__(self, report: "AlignmentReport"):
        super().__init__("alignment check failed")
        self.report = report


@dataclass(frozen=True)
class ApparatusConfig:
    separation_range: tuple = (2.5, 60.0)  # mm
    separation_tolerance: float = 0.2  # mm, strict bound
    contact_force: float = 0.5  # N
    force_tolerance: float = 0.04  # relative
    burst_duration_ms: float = 200.0
    nominal_frequency_hz: float = 131.0
    tip_diameter_mm: float = 1.5

    def __post_init__(self):
        lo, hi = self.separation_range
        if not lo < hi:
            raise ValueError("separation range must satisfy min < max")
        if self.separation_tolerance <= 0 or self.force_tolerance <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class TipLayout:
    """Stimulus-tip coordinates in the skin plane for one trial."""

    task: Task
    separation: float
    orientation: Orientation
    positions: dict  # motor id -> (x, y) mm

    @classmethod
    def build(cls, task: Task, separation: float, orientation: Orientation) -> "TipLayout":
        s = float(separation)
        if task in (Task.VT2PD, Task.VT2PD_BIDIRECTIONAL):
            if orientation is Orientation.HORIZONTAL:
                pos = {"A": (-s / 2, 0.0), "B": (s / 2, 0.0)}
            else:
                pos = {"A": (0.0, -s / 2), "B": (0.0, s / 2)}
        else:
            # isosceles triangle: apex at the origin, outer tips one
            # separation away along each axis
            pos = {"C": (0.0, 0.0), "H": (s, 0.0), "V": (0.0, s)}
        return cls(task, s, orientation, pos)

    def motors(self) -> list:
        return list(self.positions)


@dataclass(frozen=True)
class FaultProfile:
    """Injectable simulator faults for exercising error and bias-guard paths."""

    kind: str  # "no_contact" | "force_drift" | "separation_stick"
    drift_fraction: float = 0.06
    drift_below_mm: float = 15.0
    stick_at_mm: float = 30.0

    def __post_init__(self):
        if self.kind not in ("no_contact", "force_drift", "separation_stick"):
            raise ValueError(f"unknown fault profile {self.kind!r}")


@dataclass
class AlignmentStep:
    separation: float
    achieved_separation: float
    force: float
    within_tolerance: bool


@dataclass
class AlignmentReport:
    steps: list
    passed: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "steps": [
                {
                    "separation_mm": s.separation,
                    "achieved_mm": s.achieved_separation,
                    # no contact -> no force reading; null keeps it JSON-safe
                    "force_n": None if math.isnan(s.force) else s.force,
                    "within_tolerance": s.within_tolerance,
                }
                for s in self.steps
            ],
        }


def alignment_separations(candidates, count: int = 5) -> list:
    """Evenly spaced targets from max to min, snapped to candidate members.

    Ties between two equally near candidates break toward the smaller one.
    """
    cand = np.asarray(candidates, dtype=float)
    targets = np.linspace(cand.max(), cand.min(), count)
    out = []
    for t in targets:
        dist = np.abs(cand - t)
        best = dist.min()
        # smallest candidate among those at minimal distance
        out.append(float(cand[dist <= best + 1e-12].min()))
    return out


# logical durations (ms) for non-burst rig motions
_SET_SEPARATION_MS = 300.0
_LOWER_MS = 400.0
_RAISE_MS = 300.0


class SimulatedApparatus:
    """Deterministic (seeded) simulator of the caliper/lifter rig."""

    def __init__(self, config: ApparatusConfig | None = None, seed: int = 0,
                 fault: FaultProfile | None = None, realtime: bool = False):
        self.config = config or ApparatusConfig()
        self.fault = fault
        self.realtime = realtime
        self._rng = np.random.default_rng(seed)
        self.clock_ms = 0.0
        self.in_contact = False
        self.separation = None  # achieved, mm
        self.transcript = []

    # -- internals ---------------------------------------------------------

    def _advance(self, ms: float):
        self.clock_ms += ms
        if self.realtime:
            time.sleep(ms / 1000.0)

    def _log(self, event: str, **fields):
        self.transcript.append({"t_ms": self.clock_ms, "event": event, **fields})

    # -- commands ----------------------------------------------------------

    def set_separation(self, target: float) -> float:
        lo, hi = self.config.separation_range
        if not lo <= target <= hi:
            raise SeparationOutOfRangeError(
                f"separation {target} mm outside [{lo}, {hi}] mm"
            )
        tol = self.config.separation_tolerance
        if self.fault and self.fault.kind == "separation_stick":
            achieved = self.fault.stick_at_mm
        else:
            achieved = target + self._rng.uniform(-tol, tol) * 0.999
        self._advance(_SET_SEPARATION_MS)
        self.separation = achieved
        self._log("set_separation", target_mm=target, achieved_mm=achieved)
        return achieved

    def lower_to_contact(self) -> float:
        if self.separation is None:
            raise ApparatusError("separation not set")
        if self.in_contact:
            raise ApparatusError("rig already in contact")
        if self.fault and self.fault.kind == "no_contact":
            self._advance(_LOWER_MS)
            raise ContactTimeoutError("pushbutton never triggered")
        tol = self.config.force_tolerance
        err = self._rng.uniform(-tol, tol) * 0.999
        if (self.fault and self.fault.kind == "force_drift"
                and self.separation < self.fault.drift_below_mm):
            err += self.fault.drift_fraction
        force = self.config.contact_force * (1.0 + err)
        self._advance(_LOWER_MS)
        self.in_contact = True
        self.force = force
        self._log("lower_to_contact", force_n=force)
        return force

    def burst(self, motors, duties) -> None:
        if not self.in_contact:
            raise NotInContactError("burst commanded while raised")
        motors = list(motors)
        duties = [float(d) for d in duties]
        if len(motors) != len(duties):
            raise ValueError("one duty per motor required")
        for d in duties:
            if not 0 <= d <= 100:
                raise ValueError(f"duty {d} outside [0, 100]")
        start = self.clock_ms
        self._advance(self.config.burst_duration_ms)
        self._log("burst", motors=motors, duties=duties, start_ms=start,
                  duration_ms=self.config.burst_duration_ms)

    def wait(self, ms: float) -> None:
        self._advance(ms)

    def raise_rig(self) -> None:
        self._advance(_RAISE_MS)
        self.in_contact = False
        self.force = 0.0
        self._log("raise")

    def reorient(self, orientation: Orientation) -> None:
        if self.in_contact:
            raise ApparatusError("cannot reorient while in contact")
        self._log("reorient", orientation=orientation.value)

    def run_alignment_check(self, candidates) -> AlignmentReport:
        """Visit five separations large-to-small, verify contact force at each."""
        steps = []
        ok = True
        for sep in alignment_separations(candidates):
            achieved = self.set_separation(sep)
            try:
                force = self.lower_to_contact()
            except ContactTimeoutError:
                steps.append(AlignmentStep(sep, achieved, float("nan"), False))
                ok = False
                continue
            finally:
                if self.in_contact:
                    self.raise_rig()
            rel = abs(force - self.config.contact_force) / self.config.contact_force
            within = rel < self.config.force_tolerance
            ok = ok and within
            steps.append(AlignmentStep(sep, achieved, force, within))
        report = AlignmentReport(steps, ok)
        self._log("alignment_check", passed=ok)
        if not ok:
            raise AlignmentFailedError(report)
        return report


# ---------------------------------------------------------------------------
# Hardware bridge wire protocol (line-based, ASCII)
#
#   SEP <mm>                          -> OK <achieved_mm>      | ERR RANGE
#   LOWER                             -> OK <force_N>          | ERR TIMEOUT
#   BURST <mask> <duty_a> <duty_b> [<duty_c>]
#                                     -> OK                    | ERR CONTACT
#   RAISE                             -> OK
#
# <mask> is a bitmask over tip slots (bit 0 = first tip of the layout).
# ---------------------------------------------------------------------------


class LineProtocolServer:
    """Serves the wire protocol over any line transport, backed by a rig."""

    def __init__(self, apparatus: SimulatedApparatus, motor_slots=("A", "B", "C")):
        self.apparatus = apparatus
        self.motor_slots = list(motor_slots)

    def handle_line(self, line: str) -> str:
        parts = line.strip().split()
        if not parts:
            return "ERR BADCMD"
        cmd = parts[0].upper()
        try:
            if cmd == "SEP" and len(parts) == 2:
                achieved = self.apparatus.set_separation(float(parts[1]))
                return f"OK {achieved:.4f}"
            if cmd == "LOWER" and len(parts) == 1:
                force = self.apparatus.lower_to_contact()
                return f"OK {force:.4f}"
            if cmd == "BURST" and len(parts) >= 4:
                mask = int(parts[1])
                duties = [float(p) for p in parts[2:]]
                motors, selected = [], []
                for i, duty in enumerate(duties):
                    if mask & (1 << i):
                        motors.append(self.motor_slots[i])
                        selected.append(duty)
                self.apparatus.burst(motors, selected)
                return "OK"
            if cmd == "RAISE" and len(parts) == 1:
                self.apparatus.raise_rig()
                return "OK"
        except SeparationOutOfRangeError:
            return "ERR RANGE"
        except ContactTimeoutError:
            return "ERR TIMEOUT"
        except NotInContactError:
            return "ERR CONTACT"
        except (ValueError, ApparatusError):
            return "ERR BADCMD"
        return "ERR BADCMD"


class BridgeApparatus:
    """Client side of the wire protocol; presents the rig interface.

    ``send`` takes one command line and returns the reply line, mirroring a
    request/response byte stream to a microcontroller bridge.
    """

    def __init__(self, send, config: ApparatusConfig | None = None,
                 motor_slots=("A", "B", "C")):
        self.send = send
        self.config = config or ApparatusConfig()
        self.motor_slots = list(motor_slots)
        self.clock_ms = 0.0
        self.in_contact = False
        self.separation = None
        self.transcript = []

    def _roundtrip(self, line: str) -> list:
        reply = self.send(line).strip().split()
        if not reply or reply[0] != "OK":
            err = reply[1] if len(reply) > 1 else "UNKNOWN"
            if err == "RANGE":
                raise SeparationOutOfRangeError(line)
            if err == "TIMEOUT":
                raise ContactTimeoutError(line)
            if err == "CONTACT":
                raise NotInContactError(line)
            raise ApparatusError(f"bridge error {err} for {line!r}")
        return reply[1:]

    def set_separation(self, target: float) -> float:
        achieved = float(self._roundtrip(f"SEP {target}")[0])
        self.separation = achieved
        self.clock_ms += _SET_SEPARATION_MS
        self.transcript.append({"t_ms": self.clock_ms, "event": "set_separation",
                                "target_mm": target, "achieved_mm": achieved})
        return achieved

    def lower_to_contact(self) -> float:
        force = float(self._roundtrip("LOWER")[0])
        self.in_contact = True
        self.clock_ms += _LOWER_MS
        self.transcript.append({"t_ms": self.clock_ms, "event": "lower_to_contact",
                                "force_n": force})
        return force

    def burst(self, motors, duties) -> None:
        mask = 0
        slot_duty = [0.0] * len(self.motor_slots)
        for motor, duty in zip(motors, duties):
            i = self.motor_slots.index(motor)
            mask |= 1 << i
            slot_duty[i] = float(duty)
        args = " ".join(f"{d}" for d in slot_duty[: max(2, mask.bit_length())])
        self._roundtrip(f"BURST {mask} {args}")
        start = self.clock_ms
        self.clock_ms += self.config.burst_duration_ms
        self.transcript.append({"t_ms": self.clock_ms, "event": "burst",
                                "motors": list(motors), "duties": list(duties),
                                "start_ms": start,
                                "duration_ms": self.config.burst_duration_ms})

    def wait(self, ms: float) -> None:
        self.clock_ms += ms

    def raise_rig(self) -> None:
        self._roundtrip("RAISE")
        self.in_contact = False
        self.clock_ms += _RAISE_MS
        self.transcript.append({"t_ms": self.clock_ms, "event": "raise"})

    def reorient(self, orientation: Orientation) -> None:
        self.transcript.append({"t_ms": self.clock_ms, "event": "reorient",
                                "orientation": orientation.value})

    def run_alignment_check(self, candidates) -> AlignmentReport:
        steps = []
        ok = True
        for sep in alignment_separations(candidates):
            achieved = self.set_separation(sep)
            try:
                force = self.lower_to_contact()
            except ContactTimeoutError:
                steps.append(AlignmentStep(sep, achieved, float("nan"), False))
                ok = False
                continue
            finally:
                if self.in_contact:
                    self.raise_rig()
            rel = abs(force - self.config.contact_force) / self.config.contact_force
            within = rel < self.config.force_tolerance
            ok = ok and within
            steps.append(AlignmentStep(sep, achieved, force, within))
        report = AlignmentReport(steps, ok)
        if not ok:
            raise AlignmentFailedError(report)
        return report
