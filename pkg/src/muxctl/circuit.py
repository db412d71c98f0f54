"""Gate-level circuits: JSON ingestion, validation and 1q/2q layering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ONE_QUBIT = {"u3", "x", "sx", "h", "rz", "id"}
TWO_QUBIT = {"cz", "sqrt_cz"}
N_PARAMS = {"u3": 3, "rz": 1, "x": 0, "sx": 0, "h": 0, "id": 0, "cz": 0, "sqrt_cz": 0}

# Named gates expressed as U3(theta, phi, lam); equal up to global phase.
CANONICAL_U3 = {
    "x": (math.pi, 0.0, math.pi),
    "h": (math.pi / 2, 0.0, math.pi),
    "sx": (math.pi / 2, -math.pi / 2, math.pi / 2),
    "id": (0.0, 0.0, 0.0),
}


class CircuitError(Exception):
    pass


class ParseError(CircuitError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class ValidationError(CircuitError):
    pass


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]],
        dtype=complex,
    )


def rz_matrix(lam: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * lam), np.exp(0.5j * lam)])


def u3_params(u: np.ndarray) -> tuple[float, float, float]:
    """(theta, phi, lam) with U = e^{i g} U3(theta, phi, lam)."""
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    su = u / np.sqrt(det)
    theta = 2 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
    a = np.angle(su[1, 1]) if abs(su[1, 1]) > 1e-12 else 0.0
    b = np.angle(su[1, 0]) if abs(su[1, 0]) > 1e-12 else 0.0
    # su = e^{-i(phi+lam)/2} U3 => arg su11 = (phi+lam)/2, arg su10 = (phi-lam)/2
    if abs(su[1, 1]) <= 1e-12:
        a = b
    if abs(su[1, 0]) <= 1e-12:
        b = a
    phi, lam = a + b, a - b
    return float(theta), float(phi), float(lam)


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    @property
    def is_two_qubit(self) -> bool:
        return self.name in TWO_QUBIT

    def matrix(self) -> np.ndarray:
        if self.name == "u3":
            return u3_matrix(*self.params)
        if self.name == "rz":
            return rz_matrix(self.params[0])
        if self.name in CANONICAL_U3:
            return u3_matrix(*CANONICAL_U3[self.name])
        if self.name == "cz":
            return np.diag([1, 1, 1, -1]).astype(complex)
        if self.name == "sqrt_cz":
            return np.diag([1, 1, 1, 1j])
        raise ValidationError(f"unknown gate {self.name!r}")


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValidationError("num_qubits must be positive")
        for i, g in enumerate(self.gates):
            validate_gate(g, self.num_qubits, f"gates[{i}]")


def validate_gate(g: Gate, num_qubits: int, where: str = "gate") -> None:
    if g.name not in N_PARAMS:
        raise ValidationError(f"{where}: unknown gate name {g.name!r}")
    arity = 2 if g.name in TWO_QUBIT else 1
    if len(g.qubits) != arity:
        raise ValidationError(f"{where}: {g.name} expects {arity} qubit(s), got {len(g.qubits)}")
    if len(set(g.qubits)) != len(g.qubits):
        raise ValidationError(f"{where}: repeated qubit index in {list(g.qubits)}")
    for q in g.qubits:
        if not 0 <= q < num_qubits:
            raise ValidationError(f"{where}: qubit {q} out of range for {num_qubits} qubits")
    if len(g.params) != N_PARAMS[g.name]:
        raise ValidationError(
            f"{where}: {g.name} expects {N_PARAMS[g.name]} parameter(s), got {len(g.params)}"
        )
    if not all(math.isfinite(p) for p in g.params):
        raise ValidationError(f"{where}: non-finite parameter")


def canonicalize(g: Gate) -> Gate:
    """Rewrite named single-qubit gates (x, h, sx, id, rz) as u3."""
    if g.name in CANONICAL_U3:
        return Gate("u3", g.qubits, CANONICAL_U3[g.name])
    if g.name == "rz":
        return Gate("u3", g.qubits, (0.0, 0.0, g.params[0]))
    return g


def _line_of(text: str, needle: str, start: int = 0) -> int | None:
    pos = text.find(needle, start)
    return None if pos < 0 else text.count("\n", 0, pos) + 1


def parse_circuit(json_text: str) -> Circuit:
    """Parse the circuit JSON document and canonicalise 1q gates to u3."""
    try:
        doc = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    nq = doc.get("num_qubits")
    if not isinstance(nq, int) or isinstance(nq, bool):
        raise ParseError("num_qubits must be an integer", _line_of(json_text, '"num_qubits"'), "num_qubits")
    raw = doc.get("gates", [])
    if not isinstance(raw, list):
        raise ParseError("gates must be an array", _line_of(json_text, '"gates"'), "gates")
    gates = []
    for i, item in enumerate(raw):
        where = f"gates[{i}]"
        if not isinstance(item, dict):
            raise ParseError("gate must be an object", field=where)
        name = item.get("name")
        if not isinstance(name, str):
            raise ParseError("gate name must be a string", field=f"{where}.name")
        qubits = item.get("qubits")
        if not isinstance(qubits, list) or not all(
            isinstance(q, int) and not isinstance(q, bool) for q in qubits
        ):
            raise ParseError("qubits must be an array of integers", field=f"{where}.qubits")
        params = item.get("params", [])
        if not isinstance(params, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in params
        ):
            raise ParseError("params must be an array of numbers", field=f"{where}.params")
        g = Gate(name.lower(), tuple(qubits), tuple(float(p) for p in params))
        validate_gate(g, nq if nq > 0 else 1, where)
        gates.append(canonicalize(g))
    return Circuit(nq, tuple(gates))


def circuit_to_json(c: Circuit) -> str:
    return json.dumps(
        {
            "num_qubits": c.num_qubits,
            "gates": [
                {"name": g.name, "qubits": list(g.qubits), **({"params": list(g.params)} if g.params else {})}
                for g in c.gates
            ],
        },
        indent=2,
    )


@dataclass
class SingleQubitLayer:
    """One 2x2 unitary per qubit; identity entries are explicit."""

    unitaries: dict[int, np.ndarray]

    def u3(self, q: int) -> tuple[float, float, float]:
        return u3_params(self.unitaries[q])


@dataclass
class TwoQubitLayer:
    """Disjoint pairs; ``roles`` maps each pair to 'cz', 'sqrt_cz' or 'identity'."""

    roles: dict[tuple[int, int], str] = field(default_factory=dict)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(self.roles)

    def active_pairs(self) -> list[tuple[int, int]]:
        return [p for p, r in self.roles.items() if r != "identity"]


@dataclass
class LayeredCircuit:
    num_qubits: int
    layers: list

    def check(self) -> None:
        if not self.layers:
            return
        for i, layer in enumerate(self.layers):
            expect = SingleQubitLayer if i % 2 == 0 else TwoQubitLayer
            if not isinstance(layer, expect):
                raise ValidationError(f"layer {i} should be {expect.__name__}")
            if isinstance(layer, SingleQubitLayer):
                if set(layer.unitaries) != set(range(self.num_qubits)):
                    raise ValidationError(f"layer {i} does not cover every qubit")
            else:
                seen = [q for p in layer.pairs for q in p]
                if len(seen) != len(set(seen)):
                    raise ValidationError(f"layer {i} has overlapping pairs")
        if not isinstance(self.layers[-1], SingleQubitLayer):
            raise ValidationError("last layer must be single-qubit")

    def structure(self) -> list:
        """Layer kinds and pair roles, without the 1q matrices."""
        out = []
        for layer in self.layers:
            if isinstance(layer, SingleQubitLayer):
                out.append(("1q", tuple(sorted(layer.unitaries))))
            else:
                out.append(("2q", tuple(sorted(layer.roles.items()))))
        return out


def layerize(c: Circuit, idle_pairs: Iterable[Sequence[int]] | None = None) -> LayeredCircuit:
    """Greedy as-soon-as-possible layering into alternating 1q/2q layers.

    Single-qubit gates on a qubit are composed into one unitary per layer.
    ``idle_pairs`` lists coupler pairs that share the flux line; in each 2q
    layer those disjoint from the active gates are added in the Identity role.
    """
    n = c.num_qubits
    last = [-1] * n
    one: dict[int, dict[int, np.ndarray]] = {}
    two: dict[int, dict[tuple[int, int], str]] = {}
    for g in c.gates:
        if g.is_two_qubit:
            a, b = g.qubits
            j = max(last[a], last[b]) + 1
            if j % 2 == 0:
                j += 1
            two.setdefault(j, {})[(a, b)] = g.name
            last[a] = last[b] = j
        else:
            (q,) = g.qubits
            j = last[q] if last[q] % 2 == 0 and last[q] >= 0 else last[q] + 1
            layer = one.setdefault(j, {})
            layer[q] = g.matrix() @ layer.get(q, np.eye(2, dtype=complex))
            last[q] = j
    if not one and not two:
        return LayeredCircuit(n, [])
    depth = max(list(one) + list(two)) + 1
    if depth % 2 == 0:
        depth += 1
    idle = [tuple(p) for p in (idle_pairs or [])]
    layers: list = []
    for j in range(depth):
        if j % 2 == 0:
            got = one.get(j, {})
            layers.append(
                SingleQubitLayer({q: got.get(q, np.eye(2, dtype=complex)) for q in range(n)})
            )
        else:
            roles = dict(two.get(j, {}))
            used = {q for p in roles for q in p}
            for p in idle:
                if p in roles or (p[1], p[0]) in roles:
                    continue
                if used.isdisjoint(p):
                    roles[p] = "identity"
                    used.update(p)
            layers.append(TwoQubitLayer(roles))
    lc = LayeredCircuit(n, layers)
    lc.check()
    return lc


def flatten(lc: LayeredCircuit) -> Circuit:
    """Back to a gate list: one u3 per qubit per 1q layer, cz/sqrt_cz per active pair."""
    gates = []
    for layer in lc.layers:
        if isinstance(layer, SingleQubitLayer):
            for q in sorted(layer.unitaries):
                gates.append(Gate("u3", (q,), layer.u3(q)))
        else:
            for p, role in layer.roles.items():
                if role != "identity":
                    gates.append(Gate(role, p))
    return Circuit(lc.num_qubits, tuple(gates))


# Full-register unitaries (qubit 0 is the most significant bit). Brute force,
# intended as an oracle for small registers.


def embed_1q(u: np.ndarray, q: int, n: int) -> np.ndarray:
    ops = [np.eye(2, dtype=complex)] * n
    ops = list(ops)
    ops[q] = u
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def diag_2q(d: Sequence[complex], a: int, b: int, n: int) -> np.ndarray:
    """Diagonal two-qubit gate diag(d00, d01, d10, d11) on qubits (a, b)."""
    idx = np.arange(2**n)
    bit_a = (idx >> (n - 1 - a)) & 1
    bit_b = (idx >> (n - 1 - b)) & 1
    return np.diag(np.asarray(d, dtype=complex)[2 * bit_a + bit_b])


def circuit_unitary(c: Circuit) -> np.ndarray:
    n = c.num_qubits
    u = np.eye(2**n, dtype=complex)
    for g in c.gates:
        if g.is_two_qubit:
            u = diag_2q(np.diag(g.matrix()), *g.qubits, n) @ u
        else:
            u = embed_1q(g.matrix(), g.qubits[0], n) @ u
    return u


def layered_unitary(lc: LayeredCircuit) -> np.ndarray:
    n = lc.num_qubits
    u = np.eye(2**n, dtype=complex)
    for layer in lc.layers:
        if isinstance(layer, SingleQubitLayer):
            for q, m in layer.unitaries.items():
                u = embed_1q(m, q, n) @ u
        else:
            for p, role in layer.roles.items():
                if role == "identity":
                    continue
                u = diag_2q(np.diag(Gate(role, p).matrix()), *p, n) @ u
    return u
