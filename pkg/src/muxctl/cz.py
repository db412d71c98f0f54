"""Qubit - tunable coupler - qubit model.

Modes are ordered (q1, c, q2); basis index = (i1 * dc + ic) * d2 + i2. The
Hamiltonian is the Duffing exchange model

    H = sum_m [w_m n_m + (alpha_m / 2) n_m (n_m - 1)] + sum_{mn} g_mn (a_m^dag a_n + h.c.)

with pairs (q1, c), (q2, c), (q1, q2). It conserves the total excitation
number N, which is used both for state labelling (per-N blocks) and for
rotating frames (exp(i w N t) commutes with H).

Conditional phase convention: phi = arg u00 + arg u11 - arg u01 - arg u10,
so a static interaction gives phi = -2 pi zeta t, and sqrt(CZ) =
diag(1, 1, 1, e^{i pi / 2}) needs zeta < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .numerics import (
    MAX_EIGH_DIM,
    TWO_PI,
    check_hermitian,
    eigh,
    evolve,
    expm_hermitian,
    hz,
    propagate_midpoint,
    to_hz,
    wrap_phase,
)
from .sweep import SweepResult, parallel_map

LABEL_THRESHOLD = 0.5
COMPUTATIONAL = ("000", "001", "100", "101")


class CzError(Exception):
    pass


class DimensionOverflow(CzError):
    pass


class LabelAmbiguity(CzError):
    def __init__(self, label: str, overlap: float):
        super().__init__(f"state {label} has best overlap {overlap:.3f} < {LABEL_THRESHOLD}; point is diabatic")
        self.label = label
        self.overlap = overlap


class DiabaticTrajectory(CzError):
    pass


class NoSolution(CzError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (best residual {residual:.3e} rad)")
        self.residual = residual


@dataclass(frozen=True)
class CouplerSystemSpec:
    """Frequencies and couplings in Hz. ``levels`` per mode (q1, c, q2).

    ``level_hz`` optionally replaces the Duffing ladder of a mode by explicit
    level energies (Hz, starting with 0), and ``ladder`` replaces the
    lowering-operator elements <j|a|j+1> = sqrt(j + 1). Both are keyed by mode
    index 0, 1, 2 and give a phenomenological multilevel profile.
    """

    q1: float = 5.3e9
    q2: float = 5.0e9
    coupler: float = 6.5e9
    alpha1: float = -200e6
    alpha2: float = -200e6
    alpha_c: float = -200e6
    g1c: float = 100e6
    g2c: float = 100e6
    g12: float = 10e6
    levels: tuple[int, int, int] = (4, 4, 4)
    level_hz: dict = field(default_factory=dict, hash=False, compare=False)
    ladder: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        lv = self.levels
        if isinstance(lv, int):
            object.__setattr__(self, "levels", (lv, lv, lv))
        if any(d < 3 for d in self.levels):
            raise CzError("each mode needs at least 3 levels")
        if int(np.prod(self.levels)) > MAX_EIGH_DIM:
            raise DimensionOverflow(f"Hilbert dimension {int(np.prod(self.levels))} exceeds {MAX_EIGH_DIM}")
        for m, e in self.level_hz.items():
            if len(e) != self.levels[m]:
                raise CzError(f"mode {m}: {len(e)} level energies for {self.levels[m]} levels")
        for m, x in self.ladder.items():
            if len(x) != self.levels[m] - 1:
                raise CzError(f"mode {m}: need {self.levels[m] - 1} ladder elements")

    @property
    def dim(self) -> int:
        return int(np.prod(self.levels))

    def with_coupler(self, wc: float) -> "CouplerSystemSpec":
        return replace(self, coupler=wc)

    def with_levels(self, d) -> "CouplerSystemSpec":
        return replace(self, levels=(d, d, d) if isinstance(d, int) else tuple(d))

    def swapped(self) -> "CouplerSystemSpec":
        """Qubit 1 and qubit 2 exchanged."""
        lv = self.levels
        lh = {2 - m if m != 1 else 1: v for m, v in self.level_hz.items()}
        ld = {2 - m if m != 1 else 1: v for m, v in self.ladder.items()}
        return replace(
            self,
            q1=self.q2,
            q2=self.q1,
            alpha1=self.alpha2,
            alpha2=self.alpha1,
            g1c=self.g2c,
            g2c=self.g1c,
            levels=(lv[2], lv[1], lv[0]),
            level_hz=lh,
            ladder=ld,
        )

    def mode_energies_hz(self, m: int, wc: float | None = None) -> np.ndarray:
        if m in self.level_hz:
            return np.asarray(self.level_hz[m], dtype=float)
        w, a = [(self.q1, self.alpha1), (self.coupler if wc is None else wc, self.alpha_c), (self.q2, self.alpha2)][m]
        j = np.arange(self.levels[m])
        return j * w + 0.5 * a * j * (j - 1)

    def lowering(self, m: int) -> np.ndarray:
        d = self.levels[m]
        elems = np.asarray(self.ladder.get(m, np.sqrt(np.arange(1, d))), dtype=float)
        return np.diag(elems, 1)

    def to_json(self) -> dict:
        return {
            "q1_hz": self.q1,
            "q2_hz": self.q2,
            "coupler_hz": self.coupler,
            "alpha_hz": [self.alpha1, self.alpha_c, self.alpha2],
            "g1c_hz": self.g1c,
            "g2c_hz": self.g2c,
            "g12_hz": self.g12,
            "levels": list(self.levels),
        }


def _embed(op: np.ndarray, m: int, levels: Sequence[int]) -> np.ndarray:
    mats = [np.eye(d) for d in levels]
    mats[m] = op
    return np.kron(np.kron(mats[0], mats[1]), mats[2])


@lru_cache(maxsize=64)
def _operators(levels: tuple[int, int, int], ladders: tuple) -> tuple:
    lows = [_embed(np.diag(np.asarray(ladders[m], dtype=float), 1), m, levels) for m in range(3)]
    number = np.zeros((int(np.prod(levels)),) * 2)
    for m in range(3):
        number += _embed(np.diag(np.arange(levels[m], dtype=float)), m, levels)
    return tuple(lows), number


def _ops(spec: CouplerSystemSpec):
    ladders = tuple(tuple(np.diag(spec.lowering(m), 1)) for m in range(3))
    return _operators(tuple(spec.levels), ladders)


def build_hamiltonian(spec: CouplerSystemSpec, wc: float | None = None) -> np.ndarray:
    """Static Hamiltonian (rad/s) with the coupler at bare frequency ``wc`` (Hz)."""
    (a1, ac, a2), _ = _ops(spec)
    h = np.zeros((spec.dim, spec.dim))
    for m in range(3):
        h += _embed(np.diag(hz(spec.mode_energies_hz(m, wc))), m, spec.levels)
    for g, (x, y) in ((spec.g1c, (a1, ac)), (spec.g2c, (a2, ac)), (spec.g12, (a1, a2))):
        if g:
            h += hz(g) * (x.T @ y + y.T @ x)
    h = h.astype(complex)
    check_hermitian(h)
    return h


def number_operator(spec: CouplerSystemSpec) -> np.ndarray:
    return _ops(spec)[1]


def coupler_lowering(spec: CouplerSystemSpec) -> np.ndarray:
    return _ops(spec)[0][1]


def bare_index(spec: CouplerSystemSpec, label: str) -> int:
    i1, ic, i2 = (int(ch) for ch in label)
    _, dc, d2 = spec.levels
    return (i1 * dc + ic) * d2 + i2


def bare_label(spec: CouplerSystemSpec, index: int) -> str:
    _, dc, d2 = spec.levels
    i1, rest = divmod(index, dc * d2)
    ic, i2 = divmod(rest, d2)
    return f"{i1}{ic}{i2}"


DEFAULT_LABELS = ("000", "001", "100", "101", "010", "011", "110", "111")


@dataclass
class DressedSpectrum:
    wc: float  # Hz, coupler bare frequency
    energies: dict[str, float]  # Hz
    vectors: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    overlaps: dict[str, float] = field(default_factory=dict)

    @property
    def zeta(self) -> float:
        e = self.energies
        return e["101"] + e["000"] - e["100"] - e["001"]

    def coupler_transition(self, a: int, b: int) -> float:
        e = self.energies
        return e[f"{a}1{b}"] - e[f"{a}0{b}"]

    def separations(self) -> dict[str, float]:
        """w_c^{ab} - w_c^{00} (Hz) for ab in 01, 10, 11."""
        base = self.coupler_transition(0, 0)
        return {f"{a}{b}": self.coupler_transition(a, b) - base for a, b in ((0, 1), (1, 0), (1, 1))}


def dressed_spectrum(
    spec: CouplerSystemSpec,
    wc: float | None = None,
    labels: Sequence[str] = DEFAULT_LABELS,
) -> DressedSpectrum:
    """Eigenenergies labelled by bare states.

    Labels are assigned inside each excitation-number block by a global
    maximum-overlap assignment; any requested label whose overlap falls
    below 0.5 raises LabelAmbiguity.
    """
    wc = spec.coupler if wc is None else wc
    h = build_hamiltonian(spec, wc)
    n_diag = np.rint(np.real(np.diag(number_operator(spec)))).astype(int)
    energies, vectors, overlaps = {}, {}, {}
    wanted = {bare_index(spec, l): l for l in labels}
    for n in sorted({int(n_diag[i]) for i in wanted}):
        idx = np.flatnonzero(n_diag == n)
        vals, vecs = eigh(h[np.ix_(idx, idx)], check=False)
        ov = np.abs(vecs) ** 2  # [bare row, eigen column]
        rows, cols = linear_sum_assignment(-ov)
        for r, c in zip(rows, cols):
            bi = int(idx[r])
            if bi not in wanted:
                continue
            lab = wanted[bi]
            if ov[r, c] < LABEL_THRESHOLD:
                raise LabelAmbiguity(lab, float(ov[r, c]))
            v = np.zeros(spec.dim, dtype=complex)
            v[idx] = vecs[:, c]
            # phase gauge: bare component real positive
            v *= abs(v[bi]) / v[bi]
            energies[lab] = float(to_hz(vals[c]))
            vectors[lab] = v
            overlaps[lab] = float(ov[r, c])
    return DressedSpectrum(float(wc), energies, vectors, overlaps)


def zz_vs_coupler(spec: CouplerSystemSpec, wc_grid: Sequence[float]) -> SweepResult:
    """zeta and coupler-transition separations over a grid of coupler frequencies.

    Ambiguous points are NaN and flagged in the ``labelled`` column.
    """
    wc_grid = np.asarray(wc_grid, dtype=float)
    cols = {k: np.full(wc_grid.shape, np.nan) for k in ("zeta_hz", "wc00_hz", "sep01_hz", "sep10_hz", "sep11_hz", "labelled")}
    for i, wc in enumerate(wc_grid):
        try:
            ds = dressed_spectrum(spec, wc)
        except LabelAmbiguity:
            cols["labelled"][i] = 0.0
            continue
        sep = ds.separations()
        cols["zeta_hz"][i] = ds.zeta
        cols["wc00_hz"][i] = ds.coupler_transition(0, 0)
        cols["sep01_hz"][i] = sep["01"]
        cols["sep10_hz"][i] = sep["10"]
        cols["sep11_hz"][i] = sep["11"]
        cols["labelled"][i] = 1.0
    return SweepResult(["wc_hz"], [wc_grid], cols, {"spec": spec.to_json(), "n_axes": 1})


def squid_frequency(flux: float, wc_max: float) -> float:
    """w_c(Phi) = w_max sqrt|cos(pi Phi / Phi0)|, flux in units of Phi0."""
    return wc_max * math.sqrt(abs(math.cos(math.pi * flux)))


@dataclass(frozen=True)
class FluxPulse:
    """Coupler trajectory: idle -> hold over ``rise``, hold for ``flat``, back over ``fall``."""

    idle: float = 6.5e9  # Hz
    hold: float = 6.5e9  # Hz
    flat: float = 200e-9
    rise: float = 20e-9
    fall: float = 20e-9

    @property
    def duration(self) -> float:
        return self.rise + self.flat + self.fall

    def wc(self, t):
        t = np.asarray(t, dtype=float)
        s = np.ones_like(t)
        if self.rise > 0:
            s = np.where(t < self.rise, 0.5 * (1 - np.cos(np.pi * t / self.rise)), s)
        if self.fall > 0:
            t_dn = self.duration - t
            s = np.where(t_dn < self.fall, 0.5 * (1 - np.cos(np.pi * t_dn / self.fall)), s)
        s = np.where((t < 0) | (t > self.duration), 0.0, s)
        out = self.idle + (self.hold - self.idle) * s
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TuningDrive:
    """Selective coupler drive: Omega(t) cos(w_d t + phase) on the coupler charge."""

    frequency: float  # Hz
    amplitude: float  # rad/s, peak
    duration: float = 200e-9
    phase: float = 0.0
    t0: float | None = None  # default: start of the flux flattop

    def envelope(self, t: float, start: float) -> float:
        s = t - start
        if s < 0 or s > self.duration:
            return 0.0
        return 0.5 * self.amplitude * (1 - math.cos(TWO_PI * s / self.duration))

    def to_json(self) -> dict:
        return {
            "omega_d_hz": self.frequency,
            "omega_rabi_rad_s": self.amplitude,
            "duration_s": self.duration,
            "phase_rad": self.phase,
        }


def _gauss_legendre(f, a: float, b: float, n: int = 64) -> float:
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (b - a) * x + 0.5 * (b + a)
    return float(0.5 * (b - a) * np.sum(w * np.array([f(ti) for ti in t])))


def min_gap(spec: CouplerSystemSpec, wc: float) -> float:
    """Smallest splitting (rad/s) between a computational dressed state and any other state of its block."""
    h = build_hamiltonian(spec, wc)
    n_diag = np.rint(np.real(np.diag(number_operator(spec)))).astype(int)
    ds = dressed_spectrum(spec, wc, COMPUTATIONAL)
    gap = np.inf
    for lab in COMPUTATIONAL:
        n = sum(int(c) for c in lab)
        idx = np.flatnonzero(n_diag == n)
        vals = np.linalg.eigvalsh(h[np.ix_(idx, idx)])
        e = hz(ds.energies[lab])
        others = vals[np.abs(vals - e) > 1e-6 * max(1.0, abs(e))]
        if others.size:
            gap = min(gap, float(np.min(np.abs(others - e))))
    return gap


def adiabatic_phase(spec: CouplerSystemSpec, flux: FluxPulse, check: bool = True) -> float:
    """phi = -int 2 pi zeta(w_c(t)) dt, wrapped to (-pi, pi].

    Ramps are integrated by Gauss-Legendre quadrature of the instantaneous
    zeta; the flat part contributes zeta(hold) * flat.
    """
    return wrap_phase(adiabatic_phase_unwrapped(spec, flux, check))


def adiabatic_phase_unwrapped(spec: CouplerSystemSpec, flux: FluxPulse, check: bool = True) -> float:
    def zeta(t):
        return dressed_spectrum(spec, flux.wc(t), COMPUTATIONAL).zeta

    if check:
        gaps = [min_gap(spec, w) for w in np.linspace(flux.idle, flux.hold, 9)]
        ramp = min(flux.rise, flux.fall) if flux.hold != flux.idle else math.inf
        if ramp < 10.0 / min(gaps):
            raise DiabaticTrajectory(f"ramp {ramp:.3g} s shorter than 10 / min gap = {10.0 / min(gaps):.3g} s")
    total = dressed_spectrum(spec, flux.hold, COMPUTATIONAL).zeta * flux.flat
    if flux.rise > 0:
        total += _gauss_legendre(zeta, 0.0, flux.rise)
    if flux.fall > 0:
        total += _gauss_legendre(zeta, flux.rise + flux.flat, flux.duration)
    return -TWO_PI * total


def hold_for_phase(spec: CouplerSystemSpec, flux: FluxPulse, target: float, lo: float, hi: float) -> float:
    """Hold frequency in [lo, hi] whose adiabatic phase equals ``target`` (unwrapped)."""

    def f(w):
        return adiabatic_phase_unwrapped(spec, replace(flux, hold=w), check=False) - target

    return brentq(f, lo, hi, xtol=1.0)


def conditional_phase(u: dict[str, complex]) -> float:
    return wrap_phase(np.angle(u["000"]) + np.angle(u["101"]) - np.angle(u["001"]) - np.angle(u["100"]))


@dataclass
class TuningResult:
    leak: float  # 1 - |<101|psi_11>|^2
    phase: float  # conditional phase, rad
    amplitudes: dict[str, complex] = field(default_factory=dict)


class CouplerSimulator:
    """Flux pulse plus optional selective drive on the coupler.

    The ramps carry no drive, conserve N, and only matter on the N <= 2
    states, so their propagators are computed once on that subspace with RK4
    in the frame rotating at the mean qubit frequency times N. The flattop
    with the drive is propagated over the full space in the frame rotating at
    the drive frequency times N, where the rotating-wave drive
    (Omega / 2)(e^{i phase} a_c + h.c.) varies only through its envelope;
    exact exponentials at the envelope midpoints are used there. Frames are
    exchanged with exp(i (w2 - w1) N t). Population pushed to N >= 3 by the
    drive cannot return to the computational states during the ramp down,
    so it is dropped there.
    """

    def __init__(self, spec: CouplerSystemSpec, flux: FluxPulse, ramp_dt: float | None = None, flat_dt: float = 1e-9):
        self.spec = spec
        self.flux = flux
        self.flat_dt = flat_dt
        self.n = np.real(np.diag(number_operator(spec)))
        self.wr = hz(0.5 * (spec.q1 + spec.q2))
        self.ac = coupler_lowering(spec).astype(complex)
        self.h_zero = build_hamiltonian(spec, 0.0)
        # coupler energies are linear in its bare frequency unless overridden
        self.n_c = np.zeros(spec.dim) if 1 in spec.level_hz else np.real(np.diag(_embed(np.diag(np.arange(spec.levels[1], dtype=float)), 1, spec.levels)))
        self.idle = dressed_spectrum(spec, flux.idle, COMPUTATIONAL)
        self.h_hold = self.h(flux.hold)
        self.sub = np.flatnonzero(self.n <= 2)
        sub = self.sub
        self._h_zero_sub = self.h_zero[np.ix_(sub, sub)] - self.wr * np.diag(self.n[sub])
        self._n_c_sub = np.diag(self.n_c[sub])
        if ramp_dt is None:
            hs = [self._h_sub(w) for w in (flux.idle, flux.hold)]
            spread = max(float(np.max(np.abs(np.linalg.eigvalsh(x)))) for x in hs)
            # every N <= 2 basis column is propagated, including the fast ones
            ramp_dt = 1.0 / (100.0 * spread / TWO_PI)
        self.ramp_dt = ramp_dt
        self._up = None
        self._down = None

    def h(self, wc: float) -> np.ndarray:
        return self.h_zero + np.diag(hz(wc) * self.n_c)

    def _h_sub(self, wc: float) -> np.ndarray:
        return self._h_zero_sub + hz(wc) * self._n_c_sub

    def _ramp_propagator(self, t0: float, t1: float) -> np.ndarray:
        eye = np.eye(len(self.sub), dtype=complex)
        if t1 <= t0:
            return eye
        return evolve(lambda t: self._h_sub(self.flux.wc(t)), eye, (t0, t1), self.ramp_dt)

    def _ramp_up(self) -> np.ndarray:
        if self._up is None:
            u = self._ramp_propagator(0.0, self.flux.rise)
            psi0 = np.column_stack([self.idle.vectors[l][self.sub] for l in COMPUTATIONAL])
            full = np.zeros((self.spec.dim, len(COMPUTATIONAL)), dtype=complex)
            full[self.sub] = u @ psi0
            self._up = full
        return self._up

    def _ramp_down(self, psi: np.ndarray) -> np.ndarray:
        if self._down is None:
            self._down = self._ramp_propagator(self.flux.rise + self.flux.flat, self.flux.duration)
        out = np.zeros_like(psi)
        out[self.sub] = self._down @ psi[self.sub]
        return out

    def _frame(self, dw: float, t: float) -> np.ndarray:
        return np.exp(1j * dw * self.n * t)[:, None]

    def _flat(self, psi_r: np.ndarray, drive: TuningDrive | None) -> np.ndarray:
        t1 = self.flux.rise
        t2 = t1 + self.flux.flat
        if drive is None or drive.amplitude == 0:
            h = self.h_hold - self.wr * np.diag(self.n)
            return expm_hermitian(h, t2 - t1) @ psi_r
        wd = hz(drive.frequency)
        start = t1 if drive.t0 is None else drive.t0
        if start < t1 - 1e-15 or start + drive.duration > t2 + 1e-15:
            raise CzError("drive window must lie inside the flux flattop")
        h0 = self.h_hold - wd * np.diag(self.n)
        hd = 0.5 * (np.exp(1j * drive.phase) * self.ac + np.exp(-1j * drive.phase) * self.ac.conj().T)
        psi = self._frame(wd - self.wr, t1) * psi_r
        # undriven stretches are exact single exponentials
        if start > t1:
            psi = expm_hermitian(h0, start - t1) @ psi
        psi = propagate_midpoint(lambda t: h0 + drive.envelope(t, start) * hd, psi, (start, start + drive.duration), self.flat_dt)
        if t2 > start + drive.duration:
            psi = expm_hermitian(h0, t2 - start - drive.duration) @ psi
        return self._frame(self.wr - wd, t2) * psi

    def _result(self, psi: np.ndarray) -> TuningResult:
        amps = {l: complex(np.vdot(self.idle.vectors[l], psi[:, k])) for k, l in enumerate(COMPUTATIONAL)}
        return TuningResult(float(1.0 - abs(amps["101"]) ** 2), conditional_phase(amps), amps)

    def run(self, drive: TuningDrive | None = None) -> TuningResult:
        psi = self._ramp_up()
        psi = self._flat(psi, drive)
        return self._result(self._ramp_down(psi))

    def run_lab(self, drive: TuningDrive | None = None, dt: float = 1e-12) -> TuningResult:
        """Validation mode: full (non-RWA) drive, RK4 over the whole pulse in the w_r N frame."""
        ac = self.ac
        wr = self.wr
        frame = wr * np.diag(self.n)
        start = self.flux.rise if drive is None or drive.t0 is None else drive.t0

        def h(t):
            out = self.h(self.flux.wc(t)) - frame
            if drive is not None and drive.amplitude:
                env = drive.envelope(t, start)
                if env:
                    c = env * math.cos(hz(drive.frequency) * t + drive.phase)
                    x = ac * np.exp(-1j * wr * t)
                    out = out + c * (x + x.conj().T)
            return out

        psi0 = np.column_stack([self.idle.vectors[l] for l in COMPUTATIONAL])
        psi = evolve(h, psi0, (0.0, self.flux.duration), dt)
        return self._result(psi)


def simulate_tuning(spec: CouplerSystemSpec, flux: FluxPulse, drive: TuningDrive | None) -> TuningResult:
    return CouplerSimulator(spec, flux).run(drive)


def two_level_tuning_phase(delta: float, omega: float, duration: float, dt: float | None = None) -> tuple[float, float]:
    """Square-pulse two-level oracle: (return phase, return population).

    H = [[0, omega/2], [omega/2, delta]] in the frame rotating with the
    drive, delta = w_transition - w_d; the phase is that of the ground-state
    return amplitude. The start state has zero mean energy and H is static,
    so the dynamical phase vanishes and the return phase is purely geometric.
    """
    h = np.array([[0.0, omega / 2], [omega / 2, delta]], dtype=complex)
    dt = duration / 4000 if dt is None else dt
    psi = evolve(lambda t: h, np.array([1.0, 0.0], dtype=complex), (0.0, duration), dt)
    return float(np.angle(psi[0])), float(abs(psi[0]) ** 2)


def geometric_phase_formula(delta: float, omega: float) -> float:
    """pi (1 - delta / Omega_eff) for a closed 2 pi rotation, wrapped."""
    return wrap_phase(math.pi * (1 - delta / math.hypot(omega, delta)))


# Landscape and calibration ------------------------------------------------


@dataclass
class Landscape:
    omega_d: np.ndarray  # Hz
    amplitude: np.ndarray  # rad/s
    leak: np.ndarray  # [i, j] at (omega_d[i], amplitude[j])
    phase: np.ndarray
    phi_flux: float
    curve: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def sweeps(self) -> tuple[SweepResult, SweepResult]:
        axes = [self.omega_d, self.amplitude]
        names = ["omega_d_hz", "omega_rabi_rad_s"]
        meta = dict(self.meta, n_axes=2, phi_flux_rad=self.phi_flux)
        return (
            SweepResult(names, axes, {"non101_population": self.leak}, dict(meta)),
            SweepResult(names, axes, {"conditional_phase_rad": self.phase}, dict(meta)),
        )


def _landscape_row(args):
    sim, wd, amps = args
    out = []
    for a in amps:
        r = sim.run(TuningDrive(wd, a, sim.flux.flat))
        out.append((r.leak, r.phase))
    return out


def minimal_leakage_curve(
    sim: CouplerSimulator,
    omega_d: Sequence[float],
    amplitude: Sequence[float],
    leak: np.ndarray,
    threshold: float = 1e-2,
) -> list[dict]:
    """Per drive frequency, the interior leakage minimum over amplitude.

    The grid minimum is refined with a bounded scalar search between its
    neighbours; points whose refined leakage stays above ``threshold`` are
    dropped.
    """
    amplitude = np.asarray(amplitude, dtype=float)
    flat = sim.flux.flat
    w11 = dressed_spectrum(sim.spec, sim.flux.hold, ("101", "111")).coupler_transition(1, 1)
    out = []
    for i, wd in enumerate(omega_d):
        row = leak[i]
        # skip the rising edge near zero amplitude: a loop needs a finite drive
        interior = [j for j in range(1, len(row) - 1) if row[j] <= row[j - 1] and row[j] <= row[j + 1]]
        if not interior:
            continue
        j = min(interior, key=lambda k: row[k])
        res = minimize_scalar(
            lambda a: sim.run(TuningDrive(wd, a, flat)).leak,
            bounds=(amplitude[j - 1], amplitude[j + 1]),
            method="bounded",
            options={"xatol": 1e-4 * amplitude[j]},
        )
        r = sim.run(TuningDrive(wd, float(res.x), flat))
        if r.leak > threshold:
            continue
        delta = hz(w11 - wd)
        out.append(
            {
                "omega_d_hz": float(wd),
                "omega_rabi_rad_s": float(res.x),
                "delta_rad_s": float(delta),
                "omega_eff_rad_s": float(math.hypot(res.x, delta)),
                "leak": r.leak,
                "phase_rad": r.phase,
            }
        )
    return out


def tuning_landscape(
    spec: CouplerSystemSpec,
    flux: FluxPulse,
    omega_d: Sequence[float],
    amplitude: Sequence[float],
    workers: int | None = 1,
    threshold: float = 1e-2,
    flat_dt: float = 1e-9,
) -> Landscape:
    omega_d = np.asarray(omega_d, dtype=float)
    amplitude = np.asarray(amplitude, dtype=float)
    sim = CouplerSimulator(spec, flux, flat_dt=flat_dt)
    sim._ramp_up()
    sim._ramp_down(np.zeros((spec.dim, 1), dtype=complex))
    rows = parallel_map(_landscape_row, [(sim, wd, tuple(amplitude)) for wd in omega_d], workers)
    leak = np.array([[x[0] for x in r] for r in rows])
    phase = np.array([[x[1] for x in r] for r in rows])
    phi_flux = sim.run(None).phase
    curve = minimal_leakage_curve(sim, omega_d, amplitude, leak, threshold)
    meta = {"spec": spec.to_json(), "flux": {"idle_hz": flux.idle, "hold_hz": flux.hold, "flat_s": flux.flat, "rise_s": flux.rise, "fall_s": flux.fall}}
    return Landscape(omega_d, amplitude, leak, phase, phi_flux, curve, meta)


@dataclass
class Calibration:
    drive: TuningDrive
    achieved_phase: float
    leak: float
    target: float
    phi_flux: float

    def to_json(self) -> dict:
        return {
            "omega_d_hz": self.drive.frequency,
            "omega_rabi_rad_s": self.drive.amplitude,
            "achieved_phase_rad": self.achieved_phase,
            "leak_population": self.leak,
            "target_phase_rad": self.target,
            "flux_phase_rad": self.phi_flux,
        }


def loop_rabi(duration: float) -> float:
    """Peak rate (rad/s) of a cosine envelope whose area is one full 2 pi loop."""
    return 4.0 * math.pi / duration


class _CurveProbe:
    """Conditional phase at the leakage minimum over amplitude, for a given detuning."""

    def __init__(self, sim: CouplerSimulator, w11: float, omega_eff: float, duration: float):
        self.sim = sim
        self.w11 = w11
        self.omega_eff = omega_eff
        self.duration = duration
        self.cache: dict[float, tuple[float, TuningResult]] = {}

    def drive(self, delta: float, amp: float) -> TuningDrive:
        return TuningDrive(self.w11 - delta / TWO_PI, amp, self.duration)

    def __call__(self, delta: float) -> tuple[float, TuningResult]:
        if delta in self.cache:
            return self.cache[delta]
        oe = self.omega_eff
        guess = math.sqrt(max(oe**2 - delta**2, 0.0))
        lo = max(guess - 0.3 * oe, 1e-3 * oe)
        hi = guess + 0.3 * oe
        res = minimize_scalar(
            lambda a: self.sim.run(self.drive(delta, a)).leak,
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-7 * oe},
        )
        amp = float(res.x)
        out = (amp, self.sim.run(self.drive(delta, amp)))
        self.cache[delta] = out
        return out


def calibrate_phase(
    spec: CouplerSystemSpec,
    flux: FluxPulse,
    target: float,
    duration: float | None = None,
    tol: float = 1e-3,
    max_leak: float = 1e-3,
    flat_dt: float = 1e-9,
    sim: CouplerSimulator | None = None,
    scan: int = 9,
) -> Calibration:
    """Drive on the coupler |11> line that brings the conditional phase to ``target``.

    The extra phase of a closed loop runs from 0 to 2 pi as the detuning goes
    from +Omega_eff to -Omega_eff along the minimal-leakage curve; the
    detuning is located by a coarse scan and refined with brentq. Raises
    NoSolution with the best residual if the tolerance or the leakage bound
    cannot be met.
    """
    if not -math.pi < target <= math.pi + 1e-12:
        raise CzError("target must lie in (-pi, pi]")
    sim = sim or CouplerSimulator(spec, flux, flat_dt=flat_dt)
    duration = flux.flat if duration is None else duration
    w11 = dressed_spectrum(spec, flux.hold, ("101", "111")).coupler_transition(1, 1)
    base = sim.run(None)
    phi_flux = base.phase
    if abs(wrap_phase(target - phi_flux)) <= tol:
        return Calibration(TuningDrive(w11, 0.0, duration), phi_flux, base.leak, target, phi_flux)

    gamma = (target - phi_flux) % TWO_PI  # extra phase needed, in (0, 2 pi)
    probe = _CurveProbe(sim, w11, loop_rabi(duration), duration)
    oe = probe.omega_eff

    def extra(delta: float) -> float:
        return (probe(delta)[1].phase - phi_flux) % TWO_PI

    deltas = np.linspace(0.97 * oe, -0.97 * oe, scan)
    values = [extra(d) for d in deltas]
    best = min(range(scan), key=lambda k: abs(wrap_phase(values[k] - gamma)))
    bracket = None
    for k in range(scan - 1):
        a, b = values[k], values[k + 1]
        if abs(b - a) < math.pi and (a - gamma) * (b - gamma) <= 0:
            bracket = (deltas[k], deltas[k + 1])
            break
    if bracket is not None:
        d = brentq(lambda x: extra(x) - gamma, bracket[1], bracket[0], xtol=1e-9 * oe, rtol=1e-12)
    else:
        d = float(deltas[best])
    amp, r = probe(d)
    err = wrap_phase(r.phase - target)
    if abs(err) > tol or r.leak > max_leak:
        raise NoSolution(f"target {target:.4f} rad: leak {r.leak:.2e}", abs(err))
    return Calibration(probe.drive(d, amp), r.phase, r.leak, target, phi_flux)
