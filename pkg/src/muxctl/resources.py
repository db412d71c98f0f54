"""Wiring, multiplicity and heat-load arithmetic for multiplexed control.

Readout lines are never counted; every report says so.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from scipy.constants import hbar

READOUT_NOTE = "readout lines excluded from all counts"


class ResourceError(Exception):
    pass


def multiplicity(band: float, spacing: float) -> int:
    """M = floor(W / df)."""
    if spacing <= 0:
        raise ResourceError("spacing must be positive")
    if band < spacing:
        raise ResourceError("band must be at least one spacing wide")
    return int(math.floor(band / spacing + 1e-9))


@dataclass(frozen=True)
class LatticeSpec:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ResourceError("lattice dimensions must be non-negative")

    @property
    def qubits(self) -> int:
        return self.rows * self.cols

    @property
    def couplers(self) -> int:
        if self.qubits == 0:
            return 0
        return 2 * self.rows * self.cols - self.rows - self.cols

    def coupler_rows(self) -> list[int]:
        """Coupler counts per coupler row, top to bottom: 2 rows - 1 rows alternating horizontal/vertical."""
        if self.qubits == 0:
            return []
        out = []
        for r in range(self.rows):
            out.append(self.cols - 1)
            if r < self.rows - 1:
                out.append(self.cols)
        return out

    @classmethod
    def near_square(cls, n_qubits: int) -> "LatticeSpec":
        """Smallest near-square lattice holding at least ``n_qubits``."""
        if n_qubits <= 0:
            return cls(0, 0)
        rows = max(1, math.isqrt(n_qubits))
        return cls(rows, math.ceil(n_qubits / rows))


@dataclass
class WireCounts:
    scheme: str
    qubit_xy: int
    coupler_z: int
    coupler_xy: int
    note: str = READOUT_NOTE

    @property
    def total(self) -> int:
        return self.qubit_xy + self.coupler_z + self.coupler_xy

    def to_json(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


def _split(n: int, cap: int) -> int:
    return math.ceil(n / cap) if n > 0 else 0


def _z_groups(n: int, cap: int) -> list[int]:
    """Sizes of the Z lines serving one coupler row: two interleaved lines, each split at ``cap``."""
    sizes = []
    for half in (math.ceil(n / 2), n // 2):
        while half > 0:
            sizes.append(min(half, cap))
            half -= cap
    return sizes


def wire_counts(
    lattice: LatticeSpec,
    scheme: str = "multiplexed",
    cap: int | None = None,
    coupler_xy: str = "row",
) -> WireCounts:
    """Control-line counts for a square lattice.

    traditional: one XY line per qubit and one Z line per coupler.
    multiplexed: one qubit-XY line per qubit row and two interleaved Z lines
    per coupler row; any shared line with more than ``cap`` elements is split.
    Couplers whose Z line is shared with another coupler need an individual
    tuning drive, carried by one coupler-XY line per coupler row
    (``coupler_xy="row"``, split at ``cap``); ``coupler_xy="none"`` leaves
    them out. ``cap`` = 1 is the traditional layout.
    """
    if coupler_xy not in ("row", "none"):
        raise ResourceError("coupler_xy must be 'row' or 'none'")
    if scheme == "multiplexed" and cap == 1:
        scheme = "traditional"
    if scheme == "traditional":
        return WireCounts("traditional", lattice.qubits, lattice.couplers, 0)
    if scheme != "multiplexed":
        raise ResourceError(f"unknown scheme {scheme!r}")
    cap = cap if cap is not None else max([lattice.cols, *lattice.coupler_rows()], default=1) or 1
    if cap < 1:
        raise ResourceError("multiplicity cap must be >= 1")
    qxy = lattice.rows * _split(lattice.cols, cap) if lattice.qubits else 0
    cz = 0
    cxy = 0
    for n in lattice.coupler_rows():
        groups = _z_groups(n, cap)
        cz += len(groups)
        if coupler_xy == "row":
            cxy += _split(sum(g for g in groups if g > 1), cap)
    return WireCounts("multiplexed", qxy, cz, cxy)


def reduction_factor(lattice: LatticeSpec, cap: int | None = None) -> float:
    mux = wire_counts(lattice, "multiplexed", cap).total
    return wire_counts(lattice, "traditional").total / mux if mux else 1.0


@dataclass
class HeatLoad:
    watts: float

    @property
    def dbm(self) -> float:
        return 10.0 * math.log10(self.watts / 1e-3)


def heat_load_per_tone(omega_q_hz: float, t1: float, rabi_hz: float) -> HeatLoad:
    """P = (sqrt(pi) / 6) hbar w_q T1 Omega_d^2 with angular w_q and Omega_d."""
    if omega_q_hz <= 0 or t1 <= 0 or rabi_hz <= 0:
        raise ResourceError("qubit frequency, T1 and Rabi frequency must be positive")
    wq = 2 * math.pi * omega_q_hz
    om = 2 * math.pi * rabi_hz
    return HeatLoad(math.sqrt(math.pi) / 6.0 * hbar * wq * t1 * om**2)


def heat_load_per_attenuator(omega_q_hz: float, t1: float, rabi_hz: float, m: int) -> HeatLoad:
    """A shared line carries M tones, so its attenuator dissipates M times one tone."""
    return HeatLoad(m * heat_load_per_tone(omega_q_hz, t1, rabi_hz).watts)


@dataclass(frozen=True)
class ErrorScaling:
    t1: float
    t_gate: float
    error: float


def error_scaling(s: float) -> ErrorScaling:
    """Scaling of T1, gate time and error when the environmental coupling is scaled by ``s``."""
    if s <= 0:
        raise ResourceError("scale must be positive")
    return ErrorScaling(s**-2, 1.0 / s, s)


@dataclass(frozen=True)
class BudgetSpec:
    band: float = 1e9  # Hz
    spacing: float = 10e6  # Hz
    cables: int = 1000
    omega_q_hz: float = 5e9
    t1: float = 10e-3
    rabi_hz: float = 1.6e6
    gate_time: float = 50e-9
    passive_per_cable_w: float = 0.0  # supplied by config, not modelled

    def __post_init__(self):
        if not (self.band >= self.spacing > 0):
            raise ResourceError("need band >= spacing > 0")
        if self.cables < 0:
            raise ResourceError("cable budget must be non-negative")


SCOPES = ("qubit-xy", "all")


@dataclass
class FeasibilityReport:
    n_qubits: int
    multiplicity: int
    cables: int
    scope: str
    lines_required: int
    lattice: LatticeSpec
    multiplexed: WireCounts
    traditional: WireCounts
    heat_per_tone_w: float
    heat_per_attenuator_w: float
    active_heat_total_w: float
    passive_heat_total_w: float
    feasible: bool
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "multiplicity": self.multiplicity,
            "cables": self.cables,
            "scope": self.scope,
            "lines_required": self.lines_required,
            "feasible": self.feasible,
            "lattice": {"rows": self.lattice.rows, "cols": self.lattice.cols},
            "multiplexed": self.multiplexed.to_json(),
            "traditional": self.traditional.to_json(),
            "reduction_factor": (self.traditional.total / self.multiplexed.total) if self.multiplexed.total else 1.0,
            "heat_per_tone_w": self.heat_per_tone_w,
            "heat_per_tone_dbm": HeatLoad(self.heat_per_tone_w).dbm if self.heat_per_tone_w > 0 else None,
            "heat_per_attenuator_w": self.heat_per_attenuator_w,
            "active_heat_total_w": self.active_heat_total_w,
            "passive_heat_total_w": self.passive_heat_total_w,
            "notes": self.notes,
        }

    def table(self) -> str:
        d = self.to_json()
        rows = [
            ("qubits", d["n_qubits"]),
            ("multiplicity M", d["multiplicity"]),
            ("lattice", f"{self.lattice.rows} x {self.lattice.cols}"),
            (f"lines required ({self.scope})", d["lines_required"]),
            ("cable budget", d["cables"]),
            ("multiplexed lines (all roles)", self.multiplexed.total),
            ("traditional lines", self.traditional.total),
            ("reduction factor", f"{d['reduction_factor']:.2f}"),
            ("heat per tone", f"{self.heat_per_tone_w:.3e} W" + (f" ({d['heat_per_tone_dbm']:.1f} dBm)" if d["heat_per_tone_dbm"] is not None else "")),
            ("heat per attenuator", f"{self.heat_per_attenuator_w:.3e} W"),
            ("active heat total", f"{self.active_heat_total_w:.3e} W"),
            ("feasible", "yes" if self.feasible else "no"),
        ]
        width = max(len(k) for k, _ in rows)
        lines = [f"{k.ljust(width)}  {v}" for k, v in rows]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines)


def system_feasibility(
    budget: BudgetSpec,
    n_qubits: int,
    lattice: LatticeSpec | None = None,
    scope: str = "qubit-xy",
) -> FeasibilityReport:
    """Check a qubit count against the cable budget.

    ``scope="qubit-xy"`` counts the shared qubit drive lines, ceil(N / M);
    ``scope="all"`` counts every multiplexed control line of the lattice.
    Both counts are reported either way. M = 1 means no multiplexing and the
    traditional layout is used.
    """
    if scope not in SCOPES:
        raise ResourceError(f"scope must be one of {SCOPES}")
    if n_qubits < 0:
        raise ResourceError("qubit count must be non-negative")
    m = multiplicity(budget.band, budget.spacing)
    lattice = lattice or LatticeSpec.near_square(n_qubits)
    if lattice.qubits < n_qubits:
        raise ResourceError("lattice holds fewer qubits than requested")
    mux = wire_counts(lattice, "multiplexed", m)
    trad = wire_counts(lattice, "traditional")
    if n_qubits == 0:
        lines = 0
    elif scope == "qubit-xy":
        lines = n_qubits if m == 1 else math.ceil(n_qubits / m)
    else:
        lines = mux.total
    per_tone = heat_load_per_tone(budget.omega_q_hz, budget.t1, budget.rabi_hz).watts if n_qubits else 0.0
    notes = [READOUT_NOTE]
    if scope == "qubit-xy":
        notes.append("feasibility counts qubit drive lines only; coupler lines are reported but not budgeted")
    if m == 1:
        notes.append("M = 1: traditional one-line-per-element layout")
    return FeasibilityReport(
        n_qubits=n_qubits,
        multiplicity=m,
        cables=budget.cables,
        scope=scope,
        lines_required=lines,
        lattice=lattice,
        multiplexed=mux,
        traditional=trad,
        heat_per_tone_w=per_tone,
        heat_per_attenuator_w=per_tone * min(m, max(n_qubits, 1)),
        active_heat_total_w=per_tone * n_qubits,
        passive_heat_total_w=budget.passive_per_cable_w * lines,
        feasible=lines <= budget.cables,
        notes=notes,
    )
