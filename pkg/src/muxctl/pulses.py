"""Pulse envelopes, superposed line waveforms and schedule synthesis.

A tone contributes Omega(t) cos(2 pi f t + phase) to its line, with ``t`` the
absolute schedule time. In the frame rotating at the tone frequency this is
the rotation generator (Omega/2)(cos(phase) X - sin(phase) Y), so a pi/2
pulse with carrier phase ``p`` implements Rz(-p) SX Rz(p), which is the
convention used by the compiler.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .compiler import CompiledProgram, OneQubitCycle, TwoQubitCycle
from .mux import FrequencyPlan, LineModel, MuxError, Tone, effective_tones_at

GRID = 0.1e-9  # s
GRID_TOL = 0.005


class PulseError(Exception):
    pass


class MissingAssignment(PulseError):
    pass


def snap_to_grid(duration: float, grid: float = GRID) -> float:
    """Round a duration to the schedule grid, refusing changes above 0.5%."""
    if duration < 0:
        raise PulseError("durations must be non-negative")
    snapped = round(duration / grid) * grid
    if duration > 0 and abs(snapped - duration) > GRID_TOL * duration:
        raise PulseError(f"duration {duration:.4g} s moves by more than 0.5% on the {grid:.1e} s grid")
    return snapped


def calibrate_pi_half_amplitude(t_g: float) -> float:
    """Peak Rabi rate (rad/s) of a cosine pulse with area pi/2: A t_g / 2 = pi/2."""
    if t_g <= 0:
        raise ValueError("gate time must be positive")
    return math.pi / t_g


@dataclass(frozen=True)
class PulseEnvelope:
    shape: str  # "cosine" or "flattop"
    duration: float  # s
    peak: float  # rad/s
    rise: float = 0.0
    fall: float = 0.0

    def __post_init__(self):
        if self.shape not in ("cosine", "flattop"):
            raise PulseError(f"unknown envelope shape {self.shape!r}")
        if self.duration <= 0:
            raise PulseError("envelope duration must be positive")
        if self.shape == "flattop" and self.rise + self.fall > self.duration + 1e-18:
            raise PulseError("rise + fall exceed the flattop duration")

    def __call__(self, t):
        """Envelope value at time ``t`` measured from the pulse start."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        inside = (t >= 0) & (t <= self.duration)
        if self.shape == "cosine":
            out = np.where(inside, 0.5 * self.peak * (1 - np.cos(2 * np.pi * t / self.duration)), 0.0)
        else:
            out = np.where(inside, self.peak, 0.0)
            if self.rise > 0:
                up = inside & (t < self.rise)
                out = np.where(up, 0.5 * self.peak * (1 - np.cos(np.pi * t / self.rise)), out)
            if self.fall > 0:
                t_dn = self.duration - t
                dn = inside & (t_dn < self.fall)
                out = np.where(dn, 0.5 * self.peak * (1 - np.cos(np.pi * t_dn / self.fall)), out)
        return float(out) if out.ndim == 0 else out

    def area(self) -> float:
        if self.shape == "cosine":
            return self.peak * self.duration / 2
        return self.peak * (self.duration - (self.rise + self.fall) / 2)

    def scaled(self, s: float) -> "PulseEnvelope":
        return PulseEnvelope(self.shape, self.duration, self.peak * s, self.rise, self.fall)


@dataclass(frozen=True)
class TonePulse:
    envelope: PulseEnvelope
    frequency: float  # Hz
    phase: float = 0.0
    t0: float = 0.0  # s
    element: str | None = None

    def __post_init__(self):
        if self.t0 < 0:
            raise PulseError("pulse start time must be non-negative")

    def envelope_at(self, t):
        return self.envelope(np.asarray(t, dtype=float) - self.t0)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return self.envelope_at(t) * np.cos(2 * np.pi * self.frequency * t + self.phase)

    def scaled(self, s: float) -> "TonePulse":
        return TonePulse(self.envelope.scaled(s), self.frequency, self.phase, self.t0, self.element)

    def to_json(self) -> dict:
        env = self.envelope
        out = {
            "t0_ns": round(self.t0 * 1e9, 6),
            "duration_ns": round(env.duration * 1e9, 6),
            "shape": env.shape,
            "freq_hz": self.frequency,
            "phase_rad": self.phase,
            "peak_rad_per_s": env.peak,
        }
        if env.shape == "flattop":
            out["rise_ns"] = round(env.rise * 1e9, 6)
            out["fall_ns"] = round(env.fall * 1e9, 6)
        if self.element is not None:
            out["element"] = self.element
        return out


@dataclass
class LineWaveform:
    line_id: str
    pulses: list[TonePulse] = field(default_factory=list)

    @property
    def end(self) -> float:
        return max((p.t0 + p.envelope.duration for p in self.pulses), default=0.0)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        total = np.zeros_like(t)
        for p in self.pulses:
            total = total + p.value(t)
        return total

    def sample(self, rate: float, t_end: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Real samples of the superposed line signal at ``rate`` samples/s."""
        if rate <= 0:
            raise ValueError("sample rate must be positive")
        t_end = self.end if t_end is None else t_end
        n = int(math.floor(t_end * rate + 1e-9)) + 1
        t = np.arange(n) / rate
        return t, self.value(t)

    def to_json(self) -> dict:
        return {"line": self.line_id, "pulses": [p.to_json() for p in self.pulses]}


@dataclass(frozen=True)
class TimingConfig:
    pulse_duration: float = 50e-9  # s, each pi/2 pulse
    gap: float = 0.0  # s, between the two pulses of a cycle
    cz_slot: float = 60e-9  # s, each sqrt(CZ) slot
    peak: float | None = None  # rad/s; default pi / pulse_duration

    def snapped(self) -> "TimingConfig":
        return TimingConfig(
            snap_to_grid(self.pulse_duration),
            snap_to_grid(self.gap),
            snap_to_grid(self.cz_slot),
            self.peak,
        )

    @property
    def amplitude(self) -> float:
        return self.peak if self.peak is not None else calibrate_pi_half_amplitude(self.pulse_duration)

    @property
    def one_qubit_cycle(self) -> float:
        return 2 * self.pulse_duration + self.gap


@dataclass
class Schedule:
    lines: dict[str, LineWaveform]
    cycle_starts: list[tuple[str, float]]  # (kind, start time s)
    duration: float
    final_frame: dict[int, float]

    def to_json(self) -> dict:
        return {
            "duration_ns": round(self.duration * 1e9, 6),
            "cycles": [{"kind": k, "t0_ns": round(t * 1e9, 6)} for k, t in self.cycle_starts],
            "lines": {lid: w.to_json()["pulses"] for lid, w in sorted(self.lines.items())},
            "final_frame": {str(q): v for q, v in sorted(self.final_frame.items())},
        }


def _element(q: int) -> str:
    return f"q{q}"


def synthesize(
    program: CompiledProgram,
    plan: FrequencyPlan,
    timing: TimingConfig = TimingConfig(),
    lines: dict[str, Sequence[int]] | None = None,
) -> Schedule:
    """Per-line superposed pulse schedules of a compiled program.

    Every OneQubitCycle emits two identical cosine pi/2 envelopes per qubit at
    its plan frequency with the compiled carrier phases. A TwoQubitCycle
    occupies two sqrt(CZ) slots on the flux lines (not rendered here) and, if
    it carries X dressing, a full 1q cycle between the slots. Qubit ``q`` is
    looked up in the plan as ``"q<q>"``.
    """
    timing = timing.snapped()
    if lines is None:
        lines = {"xy0": list(range(program.num_qubits))}
    line_of = {}
    for lid, members in lines.items():
        for q in members:
            line_of[q] = lid
    freqs = {}
    for q in range(program.num_qubits):
        if q not in line_of:
            raise MissingAssignment(f"qubit {q} is not on any XY line")
        try:
            freqs[q] = plan.frequency(_element(q))
        except MuxError:
            raise MissingAssignment(f"qubit {q} has no frequency in the plan") from None

    env = PulseEnvelope("cosine", timing.pulse_duration, timing.amplitude)
    waves = {lid: LineWaveform(lid) for lid in lines}
    starts: list[tuple[str, float]] = []
    t = 0.0

    def emit(cyc: OneQubitCycle, t0: float) -> None:
        for q in sorted(cyc.phases):
            p1, p2 = cyc.phases[q]
            w = waves[line_of[q]]
            w.pulses.append(TonePulse(env, freqs[q], p1, t0, _element(q)))
            w.pulses.append(TonePulse(env, freqs[q], p2, t0 + timing.pulse_duration + timing.gap, _element(q)))

    for cyc in program.cycles:
        if isinstance(cyc, OneQubitCycle):
            starts.append(("1q", t))
            emit(cyc, t)
            t += timing.one_qubit_cycle
        elif isinstance(cyc, TwoQubitCycle):
            starts.append(("2q", t))
            t += timing.cz_slot
            if cyc.mid is not None:
                emit(cyc.mid, t)
                t += timing.one_qubit_cycle
            t += timing.cz_slot
        else:
            raise PulseError(f"unknown cycle type {type(cyc).__name__}")
    for w in waves.values():
        w.pulses.sort(key=lambda p: (p.t0, p.element or "", p.frequency))
    return Schedule(waves, starts, round(t / GRID) * GRID, dict(program.final_frame))


def element_drive(
    element: str,
    waveforms: Iterable[LineWaveform],
    line: LineModel,
    plan: FrequencyPlan | None = None,
) -> list[TonePulse]:
    """Tone pulses seen by ``element`` after its branch filter.

    Each pulse on the element's line is scaled by the filter response at its
    frequency; pulses addressed to the element itself pass at full amplitude.
    """
    if element not in line.filters:
        raise MuxError(f"element {element!r} is not on line {line.line_id!r}")
    out = []
    for w in waveforms:
        if w.line_id != line.line_id:
            continue
        for p in w.pulses:
            probe = LineModel(line.line_id, line.filters, [_as_tone(p)])
            (_, scale, _), = effective_tones_at(element, probe, plan)
            if scale > 0:
                out.append(p.scaled(scale))
    return out


def _as_tone(p: TonePulse) -> Tone:
    return Tone(p.frequency, 1.0, p.phase, p.element)


def rwa_unitary(pulses: Sequence[TonePulse], frequency: float, t_end: float, dt: float = 0.05e-9) -> np.ndarray:
    """Two-level propagator in the frame rotating at ``frequency`` (RWA).

    Only pulses at ``frequency`` are kept. Used to check that synthesized
    phases reproduce the compiled single-qubit gate.
    """
    from .numerics import evolve

    own = [p for p in pulses if abs(p.frequency - frequency) < 1e-6]

    def h(t):
        x = 0.0
        y = 0.0
        for p in own:
            om = p.envelope_at(t)
            x += 0.5 * om * math.cos(p.phase)
            y += -0.5 * om * math.sin(p.phase)
        return np.array([[0, x - 1j * y], [x + 1j * y, 0]])

    return evolve(h, np.eye(2, dtype=complex), (0.0, t_end), dt)


def dumps_schedule(schedule: Schedule) -> str:
    return json.dumps(schedule.to_json(), indent=2, sort_keys=True)
