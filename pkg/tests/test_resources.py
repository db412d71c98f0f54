import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from muxctl.resources import (
    READOUT_NOTE,
    BudgetSpec,
    LatticeSpec,
    ResourceError,
    error_scaling,
    heat_load_per_attenuator,
    heat_load_per_tone,
    multiplicity,
    reduction_factor,
    system_feasibility,
    wire_counts,
)

HBAR = 1.054571817e-34  # J s, CODATA 2018


class TestMultiplicity:
    @pytest.mark.parametrize("band,spacing,m", [(1e9, 10e6, 100), (10e6, 10e6, 1), (3e9, 10e6, 300), (1e9, 3e7, 33)])
    def test_values(self, band, spacing, m):
        assert multiplicity(band, spacing) == m

    def test_errors(self):
        with pytest.raises(ResourceError):
            multiplicity(1e9, 0)
        with pytest.raises(ResourceError):
            multiplicity(5e6, 10e6)


class TestLattice:
    def test_edge_count(self):
        lat = LatticeSpec(10, 10)
        assert lat.couplers == 180
        assert sum(lat.coupler_rows()) == 180

    def test_near_square(self):
        lat = LatticeSpec.near_square(100_000)
        assert lat.qubits >= 100_000
        assert abs(lat.rows - lat.cols) <= 2
        assert LatticeSpec.near_square(0).qubits == 0


class TestWireCounts:
    def test_traditional_10x10(self):
        w = wire_counts(LatticeSpec(10, 10), "traditional")
        assert (w.qubit_xy, w.coupler_z, w.coupler_xy, w.total) == (100, 180, 0, 280)

    def test_3x3_by_hand(self):
        # rows of 3 qubits -> 3 XY lines; coupler rows 2,3,2,3,2 -> two Z lines each;
        # the 3-coupler rows share a Z line between 2 couplers -> one coupler-XY line each
        w = wire_counts(LatticeSpec(3, 3))
        assert (w.qubit_xy, w.coupler_z, w.coupler_xy) == (3, 10, 2)

    def test_1x1_degenerate(self):
        a = wire_counts(LatticeSpec(1, 1))
        b = wire_counts(LatticeSpec(1, 1), "traditional")
        assert a.total == b.total == 1

    def test_cap_one_is_traditional(self):
        lat = LatticeSpec(4, 5)
        assert wire_counts(lat, cap=1).total == wire_counts(lat, "traditional").total

    def test_10x10_reduction_reported(self):
        lat = LatticeSpec(10, 10)
        w = wire_counts(lat)
        assert (w.qubit_xy, w.coupler_z, w.coupler_xy) == (10, 38, 19)
        assert reduction_factor(lat) == pytest.approx(280 / 67)

    def test_10x10_reduction_at_least_tenfold(self):
        # one qubit-XY line per row and two Z lines per coupler row already need 48 lines,
        # so the layout rules cap the ratio near 280 / 48; this expectation is not met
        assert reduction_factor(LatticeSpec(10, 10)) >= 10

    def test_no_coupler_xy(self):
        w = wire_counts(LatticeSpec(3, 3), coupler_xy="none")
        assert w.coupler_xy == 0

    def test_note_and_json(self):
        d = wire_counts(LatticeSpec(2, 2)).to_json()
        assert d["note"] == READOUT_NOTE and d["total"] == 6

    def test_errors(self):
        with pytest.raises(ResourceError):
            wire_counts(LatticeSpec(2, 2), "star")
        with pytest.raises(ResourceError):
            wire_counts(LatticeSpec(2, 2), coupler_xy="all")
        with pytest.raises(ResourceError):
            LatticeSpec(-1, 2)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 15))
def test_wire_counts_monotone_in_lattice(r, c, cap):
    base = wire_counts(LatticeSpec(r, c), cap=cap).total
    assert wire_counts(LatticeSpec(r + 1, c), cap=cap).total >= base
    assert wire_counts(LatticeSpec(r, c + 1), cap=cap).total >= base
    t = wire_counts(LatticeSpec(r, c), "traditional").total
    assert wire_counts(LatticeSpec(r + 1, c), "traditional").total >= t


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 14), st.integers(2, 14), st.one_of(st.none(), st.integers(1, 20)))
def test_multiplexed_never_exceeds_traditional(r, c, cap):
    lat = LatticeSpec(r, c)
    assert wire_counts(lat, cap=cap).total <= wire_counts(lat, "traditional").total


class TestHeat:
    def test_reference_point(self):
        p = heat_load_per_tone(5e9, 10e-3, 1.6e6)
        direct = math.sqrt(math.pi) / 6 * HBAR * (2 * math.pi * 5e9) * 10e-3 * (2 * math.pi * 1.6e6) ** 2
        assert p.watts == pytest.approx(direct, rel=1e-8)
        assert abs(p.dbm - (-90.0)) <= 0.5

    def test_quadratic_in_rabi(self):
        a = heat_load_per_tone(5e9, 10e-3, 1.6e6).watts
        assert heat_load_per_tone(5e9, 10e-3, 3.2e6).watts == pytest.approx(4 * a, rel=1e-12)

    def test_linear_in_t1_and_frequency(self):
        a = heat_load_per_tone(5e9, 10e-3, 1.6e6).watts
        assert heat_load_per_tone(5e9, 30e-3, 1.6e6).watts == pytest.approx(3 * a, rel=1e-12)
        assert heat_load_per_tone(10e9, 10e-3, 1.6e6).watts == pytest.approx(2 * a, rel=1e-12)

    def test_attenuator_scales_with_m(self):
        a = heat_load_per_tone(5e9, 10e-3, 1.6e6).watts
        assert heat_load_per_attenuator(5e9, 10e-3, 1.6e6, 100).watts == pytest.approx(100 * a, rel=1e-12)

    def test_positive_inputs(self):
        with pytest.raises(ResourceError):
            heat_load_per_tone(0, 1e-3, 1e6)


class TestErrorScaling:
    def test_identity(self):
        e = error_scaling(1.0)
        assert (e.t1, e.t_gate, e.error) == (1.0, 1.0, 1.0)

    def test_half(self):
        e = error_scaling(0.5)
        assert (e.t1, e.t_gate, e.error) == (4.0, 2.0, 0.5)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_invariant(self, s):
        e = error_scaling(s)
        assert e.error * e.t1 / e.t_gate == pytest.approx(1.0, rel=1e-12)

    def test_nonpositive(self):
        with pytest.raises(ResourceError):
            error_scaling(0.0)


class TestFeasibility:
    def test_hundred_thousand_qubits_in_thousand_cables(self):
        rep = system_feasibility(BudgetSpec(band=1e9, spacing=10e6, cables=1000), 100_000)
        assert rep.multiplicity == 100
        assert rep.lines_required == 1000
        assert rep.feasible
        assert READOUT_NOTE in rep.notes

    def test_m10_infeasible(self):
        rep = system_feasibility(BudgetSpec(band=1e8, spacing=10e6, cables=1000), 100_000)
        assert rep.multiplicity == 10 and not rep.feasible

    def test_zero_qubits(self):
        rep = system_feasibility(BudgetSpec(), 0)
        assert rep.feasible and rep.lines_required == 0

    def test_all_scope_counts_every_line(self):
        rep = system_feasibility(BudgetSpec(cables=10**6), 400, scope="all")
        assert rep.lines_required == rep.multiplexed.total

    def test_json_and_table(self):
        rep = system_feasibility(BudgetSpec(), 1000)
        d = json.loads(json.dumps(rep.to_json()))
        assert d["heat_per_tone_dbm"] == pytest.approx(heat_load_per_tone(5e9, 10e-3, 1.6e6).dbm)
        assert "feasible" in rep.table()

    def test_errors(self):
        with pytest.raises(ResourceError):
            system_feasibility(BudgetSpec(), 10, scope="wires")
        with pytest.raises(ResourceError):
            system_feasibility(BudgetSpec(), 10, lattice=LatticeSpec(2, 2))
        with pytest.raises(ResourceError):
            BudgetSpec(band=1e6, spacing=1e7)
