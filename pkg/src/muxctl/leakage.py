"""Leakage of a multilevel transmon under a multi-tone drive.

Lab frame, no rotating-wave approximation:

    H(t) = sum_j E_j |j><j| + c(t) (a + a^dagger),
    c(t) = sum_k Omega_k(t) cos(2 pi f_k t + phase_k)

with Duffing energies E_j = j w01 + alpha j (j - 1) / 2. Energies are shifted
so levels 0 and 2 sit symmetrically about zero before integrating (a global
phase only), which keeps RK4 phase and norm errors small where the
population lives.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .numerics import TWO_PI, evolve, hz, n_steps
from .pulses import PulseEnvelope, TonePulse, calibrate_pi_half_amplitude
from .sweep import SweepResult, parallel_map

MAX_LEVELS = 10
MAX_TONES = 16
TOP_LEVEL_TOL = 1e-4
DT_FACTOR = 60.0


class LeakageError(Exception):
    pass


class OutOfPerturbativeRegime(LeakageError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TransmonSpec:
    frequency: float = 5.0e9  # Hz, w01 / 2 pi
    anharmonicity: float = -200e6  # Hz
    levels: int = 5

    def __post_init__(self):
        if not 3 <= self.levels <= MAX_LEVELS:
            raise LeakageError(f"levels must be in [3, {MAX_LEVELS}]")

    def level_hz(self, j: int) -> float:
        return j * self.frequency + self.anharmonicity * j * (j - 1) / 2

    def energies(self) -> np.ndarray:
        """Level energies in rad/s."""
        return np.array([hz(self.level_hz(j)) for j in range(self.levels)])

    def transition_hz(self, i: int, j: int) -> float:
        return self.level_hz(j) - self.level_hz(i)

    def with_levels(self, d: int) -> "TransmonSpec":
        return TransmonSpec(self.frequency, self.anharmonicity, d)


def default_dt(spec: TransmonSpec, freqs_hz: Sequence[float]) -> float:
    """dt = 1 / (60 max(f_k, E_top / 2 pi)).

    The hard bound is 1/40 of the fastest period; 60 keeps RK4 norm loss
    below 1e-6 even when the upper levels are strongly populated.
    """
    f_max = max([abs(f) for f in freqs_hz] + [spec.level_hz(spec.levels - 1)])
    return 1.0 / (DT_FACTOR * f_max)


class _ToneGroup:
    """Tones sharing one envelope; frequencies, amplitudes and phases per batch column."""

    def __init__(self, envelope: PulseEnvelope, t0: float, w: np.ndarray, amp: np.ndarray, phase: np.ndarray):
        self.envelope = envelope
        self.t0 = t0
        self.w = w  # (K, B) rad/s
        self.amp = amp  # (K, B)
        self.phase = phase  # (K, B)
        self._cos = envelope.shape == "cosine"

    def env(self, t: float) -> float:
        e = self.envelope
        s = t - self.t0
        if s < 0 or s > e.duration:
            return 0.0
        if self._cos:
            return 0.5 * e.peak * (1.0 - math.cos(TWO_PI * s / e.duration))
        return float(e(s))

    def coefficient(self, t: float) -> np.ndarray:
        env = self.env(t)
        if env == 0.0:
            return np.zeros(self.w.shape[1])
        # first row is summed last so swapping two later rows is exact
        terms = self.amp * np.cos(self.w * t + self.phase)
        rest = terms[1:].sum(axis=0) if terms.shape[0] > 1 else 0.0
        return env * (terms[0] + rest)


class MultiToneTransmon:
    """Batched lab-frame Hamiltonian; column b of the state sees drive column b.

    Applied with elementwise operations only, so each column's arithmetic is
    independent of how many columns share the batch.
    """

    def __init__(self, spec: TransmonSpec, groups: list[_ToneGroup], columns_per_drive: int = 1):
        e = spec.energies()
        # centre levels 0..2 on zero: smallest phase rates where population lives
        self.energies = (e - 0.5 * (e[0] + e[min(2, len(e) - 1)]))[:, None]
        self.ladder = np.sqrt(np.arange(1, spec.levels, dtype=float))[:, None]
        self.groups = groups
        self.rep = columns_per_drive

    def coefficient(self, t: float) -> np.ndarray:
        c = 0.0
        for g in self.groups:
            c = c + g.coefficient(t)
        c = np.asarray(c, dtype=float)
        return np.repeat(c, self.rep) if self.rep > 1 and c.ndim else c

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray:
        c = self.coefficient(t)
        out = self.energies * psi
        hop_up = self.ladder * psi[1:]
        hop_dn = self.ladder * psi[:-1]
        out[:-1] += c * hop_up
        out[1:] += c * hop_dn
        return out


def _groups_from_tones(tones: Sequence[TonePulse]) -> list[_ToneGroup]:
    by_env: dict = {}
    for tp in tones:
        e = tp.envelope
        by_env.setdefault((e.shape, e.duration, e.rise, e.fall, tp.t0), []).append(tp)
    groups = []
    for (shape, duration, rise, fall, t0), members in by_env.items():
        w = np.array([[hz(tp.frequency)] for tp in members])
        amp = np.array([[tp.envelope.peak] for tp in members])
        ph = np.array([[tp.phase] for tp in members])
        groups.append(_ToneGroup(PulseEnvelope(shape, duration, 1.0, rise, fall), t0, w, amp, ph))
    return groups


@dataclass
class LeakageResult:
    populations: np.ndarray  # per level
    initial: object
    state: np.ndarray = field(repr=False, default=None)

    @property
    def leakage(self) -> float:
        return float(max(0.0, 1.0 - self.populations[0] - self.populations[1]))


def _initial_vector(initial, d: int) -> np.ndarray:
    if isinstance(initial, (int, np.integer)):
        if not 0 <= initial < d:
            raise LeakageError(f"initial level {initial} outside 0..{d - 1}")
        v = np.zeros(d, dtype=complex)
        v[initial] = 1.0
        return v
    v = np.asarray(initial, dtype=complex)
    if v.shape != (d,):
        raise LeakageError(f"initial state must have {d} amplitudes")
    return v / np.linalg.norm(v)


def _check_top(pop: np.ndarray) -> None:
    top = float(np.max(pop[-1]))
    if top > TOP_LEVEL_TOL:
        warnings.warn(f"top-level population {top:.2e} exceeds {TOP_LEVEL_TOL:.0e}; raise the truncation", TruncationWarning, stacklevel=3)


def simulate_driven_transmon(
    spec: TransmonSpec,
    tones: Sequence[TonePulse],
    initial=0,
    dt: float | None = None,
    t_end: float | None = None,
) -> LeakageResult:
    """Evolve one initial state through the tone list; returns final populations."""
    if len(tones) > MAX_TONES:
        raise LeakageError(f"at most {MAX_TONES} tones supported")
    t_end = max((tp.t0 + tp.envelope.duration for tp in tones), default=0.0) if t_end is None else t_end
    dt = default_dt(spec, [tp.frequency for tp in tones]) if dt is None else dt
    psi0 = _initial_vector(initial, spec.levels)
    h = MultiToneTransmon(spec, _groups_from_tones(tones))
    psi = evolve(h, psi0[:, None], (0.0, t_end), dt)[:, 0] if t_end > 0 else psi0
    pop = np.abs(psi) ** 2
    _check_top(pop)
    return LeakageResult(pop, initial, psi)


def average_leakage(spec: TransmonSpec, tones: Sequence[TonePulse], initial_states=(0, 1), dt: float | None = None) -> float:
    return float(np.mean([simulate_driven_transmon(spec, tones, i, dt).leakage for i in initial_states]))


@dataclass(frozen=True)
class MainPulse:
    """The qubit's own pi/2 pulse; spurious tones copy its envelope."""

    duration: float = 50e-9
    peak: float | None = None  # rad/s, default pi / duration
    phase: float = 0.0

    @property
    def amplitude(self) -> float:
        return self.peak if self.peak is not None else calibrate_pi_half_amplitude(self.duration)


def _batch_leakage(
    spec: TransmonSpec,
    main: MainPulse,
    f_spur: np.ndarray,  # (S, B) Hz
    amp_spur: np.ndarray,  # (S, B) relative to the main amplitude
    initial_states: Sequence[int],
    dt: float | None,
    main_scale: float = 1.0,
) -> np.ndarray:
    """Mean leakage for B drive settings, each with S spurious tones."""
    s, b = f_spur.shape
    n_init = len(initial_states)
    w = np.vstack([np.full((1, b), hz(spec.frequency)), hz(f_spur)])
    amp = np.vstack([np.full((1, b), main_scale), amp_spur]) * main.amplitude
    phase = np.vstack([np.full((1, b), main.phase), np.zeros((s, b))])
    env = PulseEnvelope("cosine", main.duration, 1.0)
    group = _ToneGroup(env, 0.0, w, amp, phase)
    h = MultiToneTransmon(spec, [group], columns_per_drive=n_init)
    psi0 = np.zeros((spec.levels, b * n_init), dtype=complex)
    for col in range(b):
        for k, i in enumerate(initial_states):
            psi0[i, col * n_init + k] = 1.0
    if dt is None:
        dt = default_dt(spec, [spec.frequency, *np.ravel(f_spur)])
    psi = evolve(h, psi0, (0.0, main.duration), dt)
    pop = np.abs(psi) ** 2
    _check_top(pop)
    leak = np.clip(1.0 - pop[0] - pop[1], 0.0, None)
    return leak.reshape(b, n_init).mean(axis=1)


@dataclass
class LeakageMap:
    fa: np.ndarray  # Hz
    fb: np.ndarray  # Hz
    errors: np.ndarray  # [i, j] at (fa[i], fb[j])
    meta: dict = field(default_factory=dict)

    def asymmetry(self) -> float:
        """Max |L(a, b) - L(b, a)| over points present on both axes."""
        if not np.array_equal(self.fa, self.fb):
            raise LeakageError("symmetry check needs identical axes")
        return float(np.max(np.abs(self.errors - self.errors.T)))

    def to_sweep(self) -> SweepResult:
        return SweepResult(["omega_a_hz", "omega_b_hz"], [self.fa, self.fb], {"leakage_error": self.errors}, dict(self.meta, n_axes=2))


def _map_chunk(args) -> np.ndarray:
    spec, main, fa, fb, amp_a, amp_b, initial_states, dt = args
    return _batch_leakage(spec, main, np.vstack([fa, fb]), np.vstack([amp_a, amp_b]), initial_states, dt)


def leakage_map(
    spec: TransmonSpec,
    main: MainPulse = MainPulse(),
    fa: Sequence[float] | None = None,
    fb: Sequence[float] | None = None,
    attenuation: Callable[[np.ndarray], np.ndarray] | None = None,
    initial_states: Sequence[int] = (0, 1),
    dt: float | None = None,
    workers: int | None = 1,
    chunk: int = 256,
) -> LeakageMap:
    """Leakage error over a grid of two spurious tone frequencies.

    Both spurious tones copy the main pulse envelope and amplitude.
    ``attenuation`` maps frequencies (Hz) to amplitude scales; None means no
    filtering. Grid points are independent; results are placed by index.
    """
    fa = np.linspace(4.5e9, 5.5e9, 32) if fa is None else np.asarray(fa, dtype=float)
    fb = fa.copy() if fb is None else np.asarray(fb, dtype=float)
    ga, gb = np.meshgrid(fa, fb, indexing="ij")
    flat_a, flat_b = ga.ravel(), gb.ravel()
    if attenuation is None:
        sa, sb = np.ones_like(flat_a), np.ones_like(flat_b)
    else:
        sa, sb = np.asarray(attenuation(flat_a), dtype=float), np.asarray(attenuation(flat_b), dtype=float)
    if dt is None:
        dt = default_dt(spec, [spec.frequency, float(flat_a.max()), float(flat_b.max())])
    jobs = []
    for s in range(0, flat_a.size, chunk):
        sl = slice(s, s + chunk)
        jobs.append((spec, main, flat_a[sl], flat_b[sl], sa[sl], sb[sl], tuple(initial_states), dt))
    parts = parallel_map(_map_chunk, jobs, workers)
    errors = np.concatenate(parts).reshape(ga.shape)
    meta = {
        "levels": spec.levels,
        "omega01_hz": spec.frequency,
        "anharmonicity_hz": spec.anharmonicity,
        "pulse_duration_s": main.duration,
        "pulse_peak_rad_s": main.amplitude,
        "initial_states": list(initial_states),
        "attenuation": "none" if attenuation is None else "filtered",
        "dt_s": dt,
    }
    return LeakageMap(fa, fb, errors, meta)


def point_leakage(
    spec: TransmonSpec,
    fa: Sequence[float] | float,
    fb: Sequence[float] | float | None = None,
    main: MainPulse = MainPulse(),
    scale_a: Sequence[float] | float = 1.0,
    scale_b: Sequence[float] | float = 1.0,
    initial_states: Sequence[int] = (0, 1),
    dt: float | None = None,
    main_scale: float = 1.0,
) -> np.ndarray:
    """Leakage at arbitrary (fa, fb) points; ``fb=None`` drops the second tone."""
    fa = np.atleast_1d(np.asarray(fa, dtype=float))
    sa = np.broadcast_to(np.asarray(scale_a, dtype=float), fa.shape)
    if fb is None:
        f, s = fa[None, :], sa[None, :]
    else:
        fb = np.broadcast_to(np.atleast_1d(np.asarray(fb, dtype=float)), fa.shape)
        sb = np.broadcast_to(np.asarray(scale_b, dtype=float), fa.shape)
        f, s = np.vstack([fa, fb]), np.vstack([sa, sb])
    return _batch_leakage(spec, main, f, s, initial_states, dt, main_scale)


@dataclass(frozen=True)
class ResonanceLine:
    """n_a f_a + n_b f_b + n_0 f_01 = target (Hz)."""

    n_a: int
    n_b: int
    n_0: int
    target: float
    transition: tuple[int, int]

    @property
    def photons(self) -> int:
        return abs(self.n_a) + abs(self.n_b) + abs(self.n_0)

    def distance(self, fa, fb, f0: float) -> np.ndarray:
        """Distance (Hz) in the (fa, fb) plane from the line."""
        resid = self.n_a * np.asarray(fa) + self.n_b * np.asarray(fb) + self.n_0 * f0 - self.target
        return np.abs(resid) / math.hypot(self.n_a, self.n_b)


def resonance_lines(spec: TransmonSpec, max_photons: int = 3, from_levels=(0, 1)) -> list[ResonanceLine]:
    """Multi-photon resonances out of the computational levels involving a spurious tone.

    Each line is a signed combination of the two spurious tones and the main
    tone with total photon number up to ``max_photons`` that matches a
    transition i -> j with j >= 2.
    """
    out = []
    for i in from_levels:
        for j in range(2, spec.levels):
            target = spec.transition_hz(i, j)
            for na, nb, n0 in product(range(-max_photons, max_photons + 1), repeat=3):
                if (na, nb) == (0, 0) or abs(na) + abs(nb) + abs(n0) > max_photons:
                    continue
                out.append(ResonanceLine(na, nb, n0, target, (i, j)))
    return out


@dataclass
class PowerScaling:
    scales: np.ndarray  # amplitude scale of the spurious tone
    leakage: np.ndarray  # baseline-subtracted
    baseline: float
    slope: float
    intercept: float

    def project(self, scale: float) -> float:
        """Leakage extrapolated to an amplitude scale (attenuation 20 log10(1/scale) dB)."""
        return float(np.exp(self.intercept) * (scale**2) ** self.slope)


TRANSITION_CLASSES = {
    # spurious single-tone frequency for each class
    "single-photon-12": lambda s: s.transition_hz(1, 2),
    "two-photon-02": lambda s: s.transition_hz(0, 2) / 2,
}


def power_scaling(
    spec: TransmonSpec,
    transition: str,
    scales: Sequence[float],
    main: MainPulse = MainPulse(),
    dt: float | None = None,
    max_leakage: float = 1e-2,
) -> PowerScaling:
    """Log-log slope of leakage versus spurious-tone power on one resonance.

    A single spurious tone sits on the resonance of ``transition`` while the
    main pulse runs. Leakage without the spurious tone is subtracted first.
    """
    if transition not in TRANSITION_CLASSES:
        raise LeakageError(f"unknown transition class {transition!r}")
    scales = np.asarray(scales, dtype=float)
    if scales.size < 5:
        raise LeakageError("need at least 5 amplitudes")
    f = TRANSITION_CLASSES[transition](spec)
    leak = point_leakage(spec, np.full(scales.shape, f), None, main, scales, dt=dt)
    base = float(point_leakage(spec, [f], None, main, 0.0, dt=dt)[0])
    if np.max(leak) > max_leakage:
        raise OutOfPerturbativeRegime(f"leakage {np.max(leak):.2e} exceeds {max_leakage:.0e} at the top of the sweep")
    net = leak - base
    if np.any(net <= 0):
        raise LeakageError("spurious-tone leakage does not exceed the baseline")
    slope, intercept = np.polyfit(np.log(scales**2), np.log(net), 1)
    return PowerScaling(scales, net, base, float(slope), float(intercept))


def line_samples(line: ResonanceLine, f0: float, lo: float, hi: float, step: float) -> np.ndarray:
    """Points (fa, fb) on a resonance line inside the square [lo, hi]^2, spaced ~step."""
    if line.n_b != 0:
        fa = np.arange(lo, hi + step / 2, step / max(1.0, abs(line.n_a / line.n_b)))
        fb = (line.target - line.n_0 * f0 - line.n_a * fa) / line.n_b
    else:
        fa_fixed = (line.target - line.n_0 * f0) / line.n_a
        fb = np.arange(lo, hi + step / 2, step)
        fa = np.full_like(fb, fa_fixed)
    keep = (fa >= lo) & (fa <= hi) & (fb >= lo) & (fb <= hi)
    return np.column_stack([fa[keep], fb[keep]])


def nearest_line_distance(lines: Sequence[ResonanceLine], fa, fb, f0: float) -> np.ndarray:
    fa, fb = np.broadcast_arrays(np.asarray(fa, dtype=float), np.asarray(fb, dtype=float))
    out = np.full(fa.shape, np.inf)
    for line in lines:
        out = np.minimum(out, line.distance(fa, fb, f0))
    return out


def isolated_line_points(
    spec: TransmonSpec,
    photons: int,
    lo: float = 4.5e9,
    hi: float = 5.5e9,
    step: float = 25e6,
    clearance: float = 60e6,
    from_levels=(0, 1),
) -> np.ndarray:
    """Points on ``photons``-order lines at least ``clearance`` from every lower-order line."""
    lines = resonance_lines(spec, photons, from_levels)
    target = [l for l in lines if l.photons == photons]
    lower = [l for l in lines if l.photons < photons]
    pts = [line_samples(l, spec.frequency, lo, hi, step) for l in target]
    pts = np.unique(np.round(np.vstack([p for p in pts if len(p)]), 3), axis=0) if pts else np.zeros((0, 2))
    if len(pts) == 0 or not lower:
        return pts
    d = nearest_line_distance(lower, pts[:, 0], pts[:, 1], spec.frequency)
    return pts[d >= clearance]
