"""Pulse-shape-invariant compilation.

Every single-qubit layer becomes two sqrt(X) pulses per qubit with virtual-Z
frame updates (Rz . SX . Rz . SX . Rz). Every two-qubit layer becomes two
sqrt(CZ) slots shared by all pairs on the flux line; pairs that should idle
are dressed with X gates so that the two slots cancel.

Pulse phase convention: a pulse with carrier phase ``p`` implements
Rz(-p) . SX . Rz(p) in the qubit frame. The carrier phase of a pulse equals the
accumulated virtual-Z frame at that point, so an Rz(lam) inserted before a
pulse shifts its carrier phase by exactly lam.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import (
    LayeredCircuit,
    SingleQubitLayer,
    TwoQubitLayer,
    diag_2q,
    embed_1q,
    rz_matrix,
)
from .numerics import wrap_phase

SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
X = np.array([[0, 1], [1, 0]], dtype=complex)

UNITARY_TOL = 1e-10
DIAG_TOL = 1e-12


class CompileError(Exception):
    pass


class NotUnitary(CompileError):
    pass


@dataclass(frozen=True)
class ZxzxzDecomposition:
    """U = e^{i global_phase} Rz(post_z) SX Rz(mid_z) SX Rz(pre_z)."""

    pre_z: float
    mid_z: float
    post_z: float
    global_phase: float = 0.0

    def matrix(self) -> np.ndarray:
        return (
            np.exp(1j * self.global_phase)
            * rz_matrix(self.post_z)
            @ SX
            @ rz_matrix(self.mid_z)
            @ SX
            @ rz_matrix(self.pre_z)
        )


def decompose_u3(u: np.ndarray) -> ZxzxzDecomposition:
    """ZXZXZ decomposition of a 2x2 unitary.

    Generic case uses U3(t, p, l) ~ Rz(p + pi) SX Rz(t + pi) SX Rz(l). When U
    is diagonal the middle angle is fixed to -pi and the whole rotation goes
    into pre_z; when U is anti-diagonal mid_z = 0 and post_z = 0.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise NotUnitary(f"expected 2x2 matrix, got {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(2))) > UNITARY_TOL:
        raise NotUnitary("input is not unitary within 1e-10")

    if abs(u[1, 0]) <= DIAG_TOL and abs(u[0, 1]) <= DIAG_TOL:
        # U ~ Rz(gamma); SX Rz(-pi) SX ~ Rz(pi)
        gamma = np.angle(u[1, 1]) - np.angle(u[0, 0])
        pre, mid, post = wrap_phase(gamma - math.pi), -math.pi, 0.0
    elif abs(u[0, 0]) <= DIAG_TOL and abs(u[1, 1]) <= DIAG_TOL:
        # U ~ X Rz(beta); SX SX = X
        beta = np.angle(u[0, 1]) - np.angle(u[1, 0])
        pre, mid, post = wrap_phase(beta), 0.0, 0.0
    else:
        det = np.linalg.det(u)
        su = u / np.sqrt(det)
        theta = 2 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
        a = np.angle(su[1, 1])
        b = np.angle(su[1, 0])
        phi, lam = a + b, a - b
        pre, mid, post = wrap_phase(lam), wrap_phase(theta + math.pi), wrap_phase(phi + math.pi)

    recon = ZxzxzDecomposition(pre, mid, post).matrix()
    inner = np.vdot(recon, u)
    return ZxzxzDecomposition(float(pre), float(mid), float(post), float(np.angle(inner)))


def pulse_matrix(phase: float) -> np.ndarray:
    """Physical sqrt(X) pulse with carrier phase ``phase``."""
    return rz_matrix(-phase) @ SX @ rz_matrix(phase)


def sqrt_cz_diag(sign: int = 1) -> np.ndarray:
    return np.array([1, 1, 1, np.exp(sign * 0.5j * math.pi)])


@dataclass
class OneQubitCycle:
    """Two pulses per qubit; ``phases[q] = (p1, p2)`` carrier phases."""

    phases: dict[int, tuple[float, float]]
    kind: str = "1q"

    def to_json(self) -> dict:
        return {
            "kind": "1q",
            "phases": {str(q): [p[0], p[1]] for q, p in sorted(self.phases.items())},
        }


@dataclass
class PairSlots:
    """Role of one pair across the two sqrt(CZ) slots of a two-qubit cycle.

    ``slot_phases`` is the conditional phase each slot should realise for this
    pair (s*pi/2 for the common flux pulse; a sqrt_cz gate retunes its second
    slot via the individual coupler drive so the pair nets +pi/2). ``frame_corrections`` are virtual-Z updates
    applied after the second slot.
    """

    pair: tuple[int, int]
    role: str
    slot_phases: tuple[float, float]
    dressed_qubit: int | None = None
    frame_corrections: dict[int, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "role": self.role,
            "slots": [0, 1],
            "slot_phases": list(self.slot_phases),
            "dressed_qubit": self.dressed_qubit,
            "frame_corrections": {str(q): v for q, v in sorted(self.frame_corrections.items())},
        }


@dataclass
class TwoQubitCycle:
    """Two sqrt(CZ) slots; ``mid`` is the 1q cycle carrying the idle-pair X dressing."""

    pairs: list[PairSlots]
    mid: OneQubitCycle | None = None
    kind: str = "2q"

    def to_json(self) -> dict:
        return {
            "kind": "2q",
            "pairs": [p.to_json() for p in self.pairs],
            "mid": self.mid.to_json() if self.mid else None,
        }


@dataclass
class CompiledProgram:
    num_qubits: int
    cycles: list
    final_frame: dict[int, float]
    global_phase: float = 0.0
    sqrt_cz_sign: int = 1

    def to_json(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "sqrt_cz_sign": self.sqrt_cz_sign,
            "cycles": [c.to_json() for c in self.cycles],
            "final_frame": {str(q): v for q, v in sorted(self.final_frame.items())},
            "global_phase": self.global_phase,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


class _Frames:
    # raw sums are kept because Rz is 4pi-periodic: each 2pi wrap of the
    # reported frame costs a global sign
    def __init__(self, n: int):
        self.raw = {q: 0.0 for q in range(n)}

    def add(self, q: int, lam: float) -> None:
        self.raw[q] += lam

    def phase(self, q: int) -> float:
        return wrap_phase(self.raw[q])

    def final(self) -> tuple[dict[int, float], float]:
        frame, sign_phase = {}, 0.0
        for q, raw in self.raw.items():
            frame[q] = wrap_phase(raw)
            wraps = round((raw - frame[q]) / (2 * math.pi))
            sign_phase += math.pi * (wraps % 2)
        return frame, sign_phase


def _one_qubit_cycle(unitaries: dict[int, np.ndarray], frames: _Frames) -> tuple[OneQubitCycle, float]:
    phases = {}
    gphase = 0.0
    for q in sorted(unitaries):
        d = decompose_u3(unitaries[q])
        gphase += d.global_phase
        frames.add(q, d.pre_z)
        p1 = frames.phase(q)
        frames.add(q, d.mid_z)
        p2 = frames.phase(q)
        frames.add(q, d.post_z)
        phases[q] = (p1, p2)
    return OneQubitCycle(phases), gphase


def compile_two_qubit_layer(layer: TwoQubitLayer, sign: int = 1) -> list[PairSlots]:
    """Slot assignment for every pair of a 2q layer.

    cz: sqrt(CZ) . sqrt(CZ) = CZ.
    identity: sqrt(CZ) (X x I) sqrt(CZ) (X x I) = I x diag(1, e^{i s pi/2}),
    removed by a virtual Rz(-s pi/2) on the second qubit. The two X gates are
    the dressing; the first is absorbed into the preceding 1q layer, the second
    rides on a 1q cycle between the slots.
    """
    out = []
    quarter = sign * math.pi / 2
    for pair, role in layer.roles.items():
        a, b = pair
        if role == "cz":
            out.append(PairSlots(pair, role, (quarter, quarter)))
        elif role == "sqrt_cz":
            out.append(PairSlots(pair, role, (quarter, math.pi / 2 - quarter)))
        elif role == "identity":
            out.append(PairSlots(pair, role, (quarter, quarter), dressed_qubit=a, frame_corrections={b: -quarter}))
        else:
            raise CompileError(f"unknown pair role {role!r}")
    return out


def compile(lc: LayeredCircuit, sqrt_cz_sign: int = 1) -> CompiledProgram:
    """Compile a layered circuit into isomorphic physical cycles."""
    if sqrt_cz_sign not in (1, -1):
        raise CompileError("sqrt_cz_sign must be +1 or -1")
    lc.check()
    n = lc.num_qubits
    layers = lc.layers
    # working copies of the 1q unitaries so the X dressing can be absorbed
    ones = {i: dict(l.unitaries) for i, l in enumerate(layers) if isinstance(l, SingleQubitLayer)}
    slot_plans = {}
    for i, layer in enumerate(layers):
        if isinstance(layer, TwoQubitLayer):
            plan = compile_two_qubit_layer(layer, sqrt_cz_sign)
            slot_plans[i] = plan
            for ps in plan:
                if ps.dressed_qubit is not None:
                    q = ps.dressed_qubit
                    ones[i - 1][q] = X @ ones[i - 1][q]

    frames = _Frames(n)
    cycles: list = []
    gphase = 0.0
    for i, layer in enumerate(layers):
        if isinstance(layer, SingleQubitLayer):
            cyc, g = _one_qubit_cycle(ones[i], frames)
            cycles.append(cyc)
            gphase += g
        else:
            plan = slot_plans[i]
            dressed = {ps.dressed_qubit for ps in plan if ps.dressed_qubit is not None}
            mid = None
            if dressed:
                mid_u = {q: (X if q in dressed else np.eye(2, dtype=complex)) for q in range(n)}
                mid, g = _one_qubit_cycle(mid_u, frames)
                gphase += g
            for ps in plan:
                for q, lam in ps.frame_corrections.items():
                    frames.add(q, lam)
                if ps.role == "identity":
                    gphase -= sqrt_cz_sign * math.pi / 4
            cycles.append(TwoQubitCycle(plan, mid))
    final, sign_phase = frames.final()
    return CompiledProgram(n, cycles, final, wrap_phase(gphase + sign_phase), sqrt_cz_sign)


def _slot_diag(phase: float) -> np.ndarray:
    return np.array([1, 1, 1, np.exp(1j * phase)])


def program_unitary(prog: CompiledProgram) -> np.ndarray:
    """Full-register unitary of a compiled program (brute-force oracle)."""
    n = prog.num_qubits
    u = np.eye(2**n, dtype=complex)

    def apply_1q(cyc: OneQubitCycle, u):
        for q, (p1, p2) in cyc.phases.items():
            u = embed_1q(pulse_matrix(p2) @ pulse_matrix(p1), q, n) @ u
        return u

    for cyc in prog.cycles:
        if isinstance(cyc, OneQubitCycle):
            u = apply_1q(cyc, u)
            continue
        for ps in cyc.pairs:
            u = diag_2q(_slot_diag(ps.slot_phases[0]), *ps.pair, n) @ u
        if cyc.mid is not None:
            u = apply_1q(cyc.mid, u)
        for ps in cyc.pairs:
            u = diag_2q(_slot_diag(ps.slot_phases[1]), *ps.pair, n) @ u
    for q, f in prog.final_frame.items():
        u = embed_1q(rz_matrix(f), q, n) @ u
    return u
