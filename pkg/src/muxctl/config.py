"""Device configuration file: one JSON document per device.

Layout (all frequencies in Hz, times in seconds)::

    {
      "qubits":   [{"id": "q0", "frequency": 5.0e9, "anharmonicity": -2e8, "levels": 5},
                   {"id": "q1", "frequency": 5.01e9}],
      "couplers": [{"id": "c01", "pair": ["q0", "q1"], "idle": 6.5e9, "bias": 5.72e9,
                    "anharmonicity": -2e8, "g_ac": 1e8, "g_bc": 1e8, "g_ab": 1e7,
                    "levels": 4, "flat": 2e-7, "rise": 2e-8, "fall": 2e-8}],
      "lines":    [{"id": "xy0", "role": "qubit-xy", "members": ["q0", "q1"]}],
      "plan":     {"base_frequency": 5.0e9, "spacing": 1e7, "band": 1e9,
                   "elements": ["q0", "q1"], "jitter_sigma": 0},
      "filter":   {"bandwidth": 5e6, "order": 3, "ideal": false},
      "timing":   {"pulse_duration": 5e-8, "gap": 0, "cz_slot": 6e-8},
      "integrator": {"leakage_dt": null, "ramp_dt": null, "flat_dt": 1e-9},
      "compiler": {"sqrt_cz_sign": 1},
      "budget":   {"passive_per_cable_w": 0}
    }

Circuit qubit ``i`` is ``qubits[i]``. A qubit listed in the plan is driven
at its plan frequency, otherwise at its own ``frequency``; the two must
agree to within half the plan spacing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .cz import CouplerSystemSpec, FluxPulse
from .leakage import TransmonSpec
from .mux import FilterSpec, FrequencyPlan, MuxError
from .pulses import TimingConfig

ROLES = ("qubit-xy", "coupler-z", "coupler-xy")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class QubitConfig:
    id: str
    frequency: float
    anharmonicity: float = -200e6
    levels: int = 5

    def transmon(self) -> TransmonSpec:
        return TransmonSpec(self.frequency, self.anharmonicity, self.levels)


@dataclass(frozen=True)
class CouplerConfig:
    id: str
    pair: tuple[str, str]
    idle: float = 6.5e9
    bias: float = 6.5e9
    anharmonicity: float = -200e6
    g_ac: float = 100e6
    g_bc: float = 100e6
    g_ab: float = 10e6
    levels: int = 4
    flat: float = 200e-9
    rise: float = 20e-9
    fall: float = 20e-9

    def flux(self) -> FluxPulse:
        return FluxPulse(self.idle, self.bias, self.flat, self.rise, self.fall)


@dataclass(frozen=True)
class LineConfig:
    id: str
    role: str
    members: tuple[str, ...]


@dataclass
class DeviceConfig:
    qubits: list[QubitConfig]
    couplers: list[CouplerConfig] = field(default_factory=list)
    lines: list[LineConfig] = field(default_factory=list)
    plan: FrequencyPlan | None = None
    filter: FilterSpec | None = None
    timing: TimingConfig = field(default_factory=TimingConfig)
    integrator: dict = field(default_factory=dict)
    sqrt_cz_sign: int = 1
    passive_per_cable_w: float = 0.0
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.validate()

    # ---- lookups
    def qubit(self, qid: str) -> QubitConfig:
        for q in self.qubits:
            if q.id == qid:
                return q
        raise ConfigError(f"unknown qubit {qid!r}")

    def coupler(self, cid: str | None = None) -> CouplerConfig:
        if not self.couplers:
            raise ConfigError("device has no couplers")
        if cid is None:
            return self.couplers[0]
        for c in self.couplers:
            if c.id == cid:
                return c
        raise ConfigError(f"unknown coupler {cid!r}")

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    def drive_frequency(self, qid: str) -> float:
        if self.plan is not None and qid in self.plan.elements:
            return self.plan.frequency(qid)
        return self.qubit(qid).frequency

    def element_plan(self) -> FrequencyPlan:
        """Plan keyed by circuit index names ``q<i>`` as used by synthesis."""
        realized = {f"q{i}": self.drive_frequency(q.id) for i, q in enumerate(self.qubits)}
        spacing = self.plan.spacing if self.plan is not None else 1.0
        base = min(realized.values(), default=0.0)
        return FrequencyPlan(base, spacing, list(realized), None, 0.0, realized)

    def xy_lines(self) -> dict[str, list[int]]:
        index = {q.id: i for i, q in enumerate(self.qubits)}
        lines = {l.id: [index[m] for m in l.members] for l in self.lines if l.role == "qubit-xy"}
        if not lines:
            lines = {"xy0": list(range(self.num_qubits))}
        return lines

    def coupler_spec(self, cid: str | None = None) -> CouplerSystemSpec:
        c = self.coupler(cid)
        qa, qb = (self.qubit(x) for x in c.pair)
        return CouplerSystemSpec(
            q1=qa.frequency,
            q2=qb.frequency,
            coupler=c.idle,
            alpha1=qa.anharmonicity,
            alpha2=qb.anharmonicity,
            alpha_c=c.anharmonicity,
            g1c=c.g_ac,
            g2c=c.g_bc,
            g12=c.g_ab,
            levels=(c.levels, c.levels, c.levels),
        )

    def filter_for(self, qid: str) -> FilterSpec | None:
        if self.filter is None:
            return None
        return self.filter.recentered(self.drive_frequency(qid))

    # ---- checks
    def validate(self) -> None:
        ids = [q.id for q in self.qubits]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate qubit ids")
        known = set(ids)
        cids = [c.id for c in self.couplers]
        if len(set(cids)) != len(cids):
            raise ConfigError("duplicate coupler ids")
        for q in self.qubits:
            if q.frequency <= 0 or q.levels < 2:
                raise ConfigError(f"qubit {q.id!r}: need positive frequency and >= 2 levels")
        for c in self.couplers:
            if len(c.pair) != 2 or c.pair[0] == c.pair[1]:
                raise ConfigError(f"coupler {c.id!r}: pair must name two distinct qubits")
            for m in c.pair:
                if m not in known:
                    raise ConfigError(f"coupler {c.id!r} references unknown qubit {m!r}")
        elements = known | set(cids)
        lids = [l.id for l in self.lines]
        if len(set(lids)) != len(lids):
            raise ConfigError("duplicate line ids")
        seen_xy: dict[str, str] = {}
        for l in self.lines:
            if l.role not in ROLES:
                raise ConfigError(f"line {l.id!r}: role must be one of {ROLES}")
            for m in l.members:
                if m not in elements:
                    raise ConfigError(f"line {l.id!r} references unknown element {m!r}")
                if l.role == "qubit-xy":
                    if m not in known:
                        raise ConfigError(f"line {l.id!r}: qubit-xy members must be qubits")
                    if m in seen_xy:
                        raise ConfigError(f"qubit {m!r} is on two XY lines")
                    seen_xy[m] = l.id
                elif m not in cids:
                    raise ConfigError(f"line {l.id!r}: {l.role} members must be couplers")
        if self.plan is not None:
            for e in self.plan.elements:
                if e not in elements:
                    raise ConfigError(f"plan references unknown element {e!r}")
            if self.plan.band is not None and self.plan.spacing > self.plan.band:
                raise ConfigError("plan spacing exceeds the declared band")
            for q in self.qubits:
                if q.id in self.plan.elements and abs(self.plan.frequency(q.id) - q.frequency) > self.plan.spacing / 2:
                    raise ConfigError(f"plan places {q.id!r} at {self.plan.frequency(q.id):.6g} Hz, far from its frequency {q.frequency:.6g} Hz")
        if self.sqrt_cz_sign not in (1, -1):
            raise ConfigError("sqrt_cz_sign must be +1 or -1")


def _get(obj: dict, key: str, kind, default: Any = ..., where: str = "") -> Any:
    if key not in obj:
        if default is ...:
            raise ConfigError(f"{where}missing field {key!r}")
        return default
    val = obj[key]
    if val is None and default is None:
        return None
    try:
        if kind is float:
            out = float(val)
            if not math.isfinite(out):
                raise ValueError
            return out
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise ValueError
            return int(val)
        if kind is bool:
            if not isinstance(val, bool):
                raise ValueError
            return val
        if kind is str:
            if not isinstance(val, str):
                raise ValueError
            return val
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}field {key!r} has invalid value {val!r}") from None


def from_dict(obj: dict) -> DeviceConfig:
    if not isinstance(obj, dict):
        raise ConfigError("device config must be a JSON object")
    qubits = []
    for i, q in enumerate(obj.get("qubits") or []):
        w = f"qubits[{i}]: "
        qubits.append(
            QubitConfig(
                _get(q, "id", str, where=w),
                _get(q, "frequency", float, where=w),
                _get(q, "anharmonicity", float, -200e6, w),
                _get(q, "levels", int, 5, w),
            )
        )
    if not qubits:
        raise ConfigError("device needs at least one qubit")
    couplers = []
    for i, c in enumerate(obj.get("couplers") or []):
        w = f"couplers[{i}]: "
        pair = c.get("pair")
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{w}pair must be a list of two qubit ids")
        couplers.append(
            CouplerConfig(
                _get(c, "id", str, where=w),
                (str(pair[0]), str(pair[1])),
                _get(c, "idle", float, 6.5e9, w),
                _get(c, "bias", float, _get(c, "idle", float, 6.5e9, w), w),
                _get(c, "anharmonicity", float, -200e6, w),
                _get(c, "g_ac", float, 100e6, w),
                _get(c, "g_bc", float, 100e6, w),
                _get(c, "g_ab", float, 10e6, w),
                _get(c, "levels", int, 4, w),
                _get(c, "flat", float, 200e-9, w),
                _get(c, "rise", float, 20e-9, w),
                _get(c, "fall", float, 20e-9, w),
            )
        )
    lines = []
    for i, l in enumerate(obj.get("lines") or []):
        w = f"lines[{i}]: "
        members = l.get("members")
        if not isinstance(members, list):
            raise ConfigError(f"{w}members must be a list")
        lines.append(LineConfig(_get(l, "id", str, where=w), _get(l, "role", str, where=w), tuple(str(m) for m in members)))
    plan = None
    if obj.get("plan") is not None:
        p = obj["plan"]
        w = "plan: "
        elements = p.get("elements")
        if not isinstance(elements, list):
            raise ConfigError(f"{w}elements must be a list")
        try:
            plan = FrequencyPlan(
                _get(p, "base_frequency", float, where=w),
                _get(p, "spacing", float, where=w),
                [str(e) for e in elements],
                _get(p, "band", float, None, w),
                _get(p, "jitter_sigma", float, 0.0, w),
            )
        except (MuxError, ValueError) as e:
            raise ConfigError(f"{w}{e}") from None
    filt = None
    if obj.get("filter") is not None:
        f = obj["filter"]
        try:
            filt = FilterSpec(
                0.0,
                _get(f, "bandwidth", float, where="filter: "),
                _get(f, "order", int, 3, "filter: "),
                _get(f, "ideal", bool, False, "filter: "),
            )
        except ValueError as e:
            raise ConfigError(f"filter: {e}") from None
    t = obj.get("timing") or {}
    timing = TimingConfig(
        _get(t, "pulse_duration", float, 50e-9, "timing: "),
        _get(t, "gap", float, 0.0, "timing: "),
        _get(t, "cz_slot", float, 60e-9, "timing: "),
        _get(t, "peak", float, None, "timing: "),
    )
    integ = obj.get("integrator") or {}
    integrator = {
        "leakage_dt": _get(integ, "leakage_dt", float, None, "integrator: "),
        "ramp_dt": _get(integ, "ramp_dt", float, None, "integrator: "),
        "flat_dt": _get(integ, "flat_dt", float, 1e-9, "integrator: "),
    }
    comp = obj.get("compiler") or {}
    budget = obj.get("budget") or {}
    return DeviceConfig(
        qubits,
        couplers,
        lines,
        plan,
        filt,
        timing,
        integrator,
        _get(comp, "sqrt_cz_sign", int, 1, "compiler: "),
        _get(budget, "passive_per_cable_w", float, 0.0, "budget: "),
        obj,
    )


def loads(text: str) -> DeviceConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}: {e.msg}") from None
    return from_dict(obj)


def load(path: str) -> DeviceConfig:
    """Read a device file. OSError propagates so callers can tell I/O from validation."""
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
