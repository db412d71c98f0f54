"""Frequency plans and the bandpass-filter multiplexer.

Filters are modelled by their Butterworth magnitude response only: no
insertion loss in the passband and no phase or group delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

MAX_ORDER = 20


class MuxError(Exception):
    pass


class Infeasible(MuxError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    center: float  # Hz
    bandwidth: float  # Hz, full passband width
    order: int = 3
    ideal: bool = False  # infinite-order limit: rejects everything off its own tone

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.order < 1:
            raise ValueError("order must be a positive integer")

    def recentered(self, center: float) -> "FilterSpec":
        return FilterSpec(center, self.bandwidth, self.order, self.ideal)


def filter_attenuation_db(spec: FilterSpec, f: float | np.ndarray):
    """Attenuation in dB: 10 log10(1 + ((f - fc) / (bw / 2))^(2n))."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    x = (f - spec.center) / (spec.bandwidth / 2)
    att = 10.0 * np.log10(1.0 + np.abs(x) ** (2 * spec.order))
    return float(att) if att.ndim == 0 else att


def amplitude_scale(att_db):
    """Field amplitude factor for an attenuation in dB (power factor squared)."""
    if np.ndim(att_db):
        return 10.0 ** (-np.asarray(att_db) / 20.0)
    return 10.0 ** (-float(att_db) / 20.0)


def min_filter_order(bandwidth: float, targets: Sequence[tuple[float, float]]) -> int:
    """Smallest Butterworth order meeting every (offset Hz, min attenuation dB) target."""
    for off, _ in targets:
        if abs(off) <= bandwidth / 2:
            raise ValueError(f"offset {off:g} Hz lies inside the passband (half width {bandwidth / 2:g} Hz)")
    probe = FilterSpec(1.0e10, bandwidth, 1)
    for n in range(1, MAX_ORDER + 1):
        spec = FilterSpec(probe.center, bandwidth, n)
        if all(filter_attenuation_db(spec, probe.center + off) >= att for off, att in targets):
            return n
    raise Infeasible(f"no Butterworth order <= {MAX_ORDER} meets the targets")


@dataclass
class FrequencyPlan:
    base_frequency: float  # Hz
    spacing: float  # Hz
    elements: list[str]
    band: float | None = None  # Hz, declared usable band W
    jitter_sigma: float = 0.0
    realized: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.band is not None and len(self.elements) > math.floor(self.band / self.spacing + 1e-9):
            raise MuxError(
                f"{len(self.elements)} elements exceed floor(W / df) = {math.floor(self.band / self.spacing)}"
            )

    @property
    def nominal(self) -> dict[str, float]:
        return {e: self.base_frequency + k * self.spacing for k, e in enumerate(self.elements)}

    def frequency(self, element: str) -> float:
        if element in self.realized:
            return self.realized[element]
        try:
            return self.nominal[element]
        except KeyError:
            raise MuxError(f"element {element!r} has no frequency assignment") from None

    def realize(self, rng: np.random.Generator) -> "FrequencyPlan":
        nom = self.nominal
        dev = rng.normal(0.0, self.jitter_sigma, len(self.elements)) if self.jitter_sigma > 0 else np.zeros(len(self.elements))
        realized = {e: nom[e] + d for e, d in zip(self.elements, dev)}
        return FrequencyPlan(self.base_frequency, self.spacing, list(self.elements), self.band, self.jitter_sigma, realized)


@dataclass
class Tone:
    frequency: float  # Hz
    amplitude: float = 1.0  # relative line amplitude
    phase: float = 0.0
    source: str | None = None


@dataclass
class LineModel:
    line_id: str
    filters: dict[str, FilterSpec]  # one branch filter per element
    tones: list[Tone] = field(default_factory=list)

    @classmethod
    def from_plan(cls, line_id: str, plan: FrequencyPlan, template: FilterSpec) -> "LineModel":
        """Filters centred on the nominal plan; one tone per element at its realised frequency."""
        filters = {e: template.recentered(f) for e, f in plan.nominal.items()}
        tones = [Tone(plan.frequency(e), 1.0, 0.0, e) for e in plan.elements]
        return cls(line_id, filters, tones)


def effective_tones_at(element: str, line: LineModel, plan: FrequencyPlan | None = None) -> list[tuple[float, float, float]]:
    """(frequency Hz, amplitude scale, phase) of every line tone after the element's filter.

    The element's own tone passes unattenuated. ``plan`` is only used to check
    membership.
    """
    if element not in line.filters:
        raise MuxError(f"element {element!r} is not on line {line.line_id!r}")
    if plan is not None and element not in plan.elements:
        raise MuxError(f"element {element!r} is not in the frequency plan")
    spec = line.filters[element]
    out = []
    for tone in line.tones:
        if tone.source == element:
            scale = 1.0
        elif spec.ideal:
            scale = 0.0
        else:
            scale = amplitude_scale(filter_attenuation_db(spec, tone.frequency))
        out.append((tone.frequency, tone.amplitude * scale, tone.phase))
    return out


@dataclass
class CollisionReport:
    trials: int
    collisions: int
    per_element_rate: dict[str, float]
    estimate: float  # independent Gaussian-tail estimate

    @property
    def fraction(self) -> float:
        return self.collisions / self.trials if self.trials else 0.0

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "collisions": self.collisions,
            "fraction": self.fraction,
            "gaussian_estimate": self.estimate,
            "per_element_rate": self.per_element_rate,
        }


def _element_collides(f: float, k: int, centers: np.ndarray, half_bw: float, guard: float) -> bool:
    if abs(f - centers[k]) > half_bw:
        return True
    others = np.delete(centers, k)
    return bool(others.size and np.min(np.abs(others - f)) < guard)


def collision_estimate(plan: FrequencyPlan, template: FilterSpec, guard: float | None = None) -> float:
    """Probability that at least one element collides, from Gaussian tails.

    Each element is treated independently; it collides when its deviation
    leaves [-min(bw/2, df - guard), +min(bw/2, df - guard)] (the inner neighbours
    are the binding ones).
    """
    if plan.jitter_sigma == 0:
        return 0.0
    guard = template.bandwidth / 2 if guard is None else guard
    m = len(plan.elements)
    half = template.bandwidth / 2
    reach = plan.spacing - guard
    p_all_ok = 1.0
    for k in range(m):
        lo = min(half, reach) if k > 0 else half
        hi = min(half, reach) if k < m - 1 else half
        p_ok = norm.cdf(hi / plan.jitter_sigma) - norm.cdf(-lo / plan.jitter_sigma)
        p_all_ok *= max(p_ok, 0.0)
    return 1.0 - p_all_ok


def validate_plan(
    plan: FrequencyPlan,
    template: FilterSpec,
    trials: int = 1000,
    seed: int = 0,
    guard: float | None = None,
) -> CollisionReport:
    """Monte-Carlo check of a frequency plan under Gaussian per-element jitter.

    A trial collides if any realised frequency falls outside its own passband
    or closer than ``guard`` (default bandwidth / 2) to a neighbour's passband
    centre. Trial ``i`` draws from its own child seed so results do not depend
    on how trials are chunked.
    """
    if plan.jitter_sigma < 0:
        raise ValueError("jitter_sigma must be non-negative")
    guard = template.bandwidth / 2 if guard is None else guard
    centers = np.array([plan.nominal[e] for e in plan.elements])
    half = template.bandwidth / 2
    counts = dict.fromkeys(plan.elements, 0)
    collisions = 0
    children = np.random.SeedSequence(seed).spawn(trials)
    for ss in children:
        real = plan.realize(np.random.default_rng(ss))
        hit = False
        for k, e in enumerate(plan.elements):
            if _element_collides(real.realized[e], k, centers, half, guard):
                counts[e] += 1
                hit = True
        collisions += hit
    rates = {e: c / trials for e, c in counts.items()} if trials else counts
    return CollisionReport(trials, collisions, rates, collision_estimate(plan, template, guard))
