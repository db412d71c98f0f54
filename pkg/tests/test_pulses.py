import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from muxctl.circuit import circuit_unitary, layerize, parse_circuit, rz_matrix
from muxctl.compiler import SX, compile, pulse_matrix
from muxctl.mux import FilterSpec, FrequencyPlan, LineModel
from muxctl.numerics import equal_up_to_phase, evolve
from muxctl.pulses import (
    MissingAssignment,
    LineWaveform,
    PulseEnvelope,
    PulseError,
    TimingConfig,
    TonePulse,
    calibrate_pi_half_amplitude,
    dumps_schedule,
    element_drive,
    rwa_unitary,
    snap_to_grid,
    synthesize,
)

MHZ = 1e6


def circ(n, gates):
    return parse_circuit(json.dumps({"num_qubits": n, "gates": gates}))


class TestAmplitude:
    def test_fifty_ns(self):
        a = calibrate_pi_half_amplitude(50e-9)
        assert a == pytest.approx(math.pi / 50e-9)
        assert a / (2 * math.pi) == pytest.approx(10e6)

    def test_doubling(self):
        assert calibrate_pi_half_amplitude(200e-9) == pytest.approx(calibrate_pi_half_amplitude(100e-9) / 2)

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            calibrate_pi_half_amplitude(0.0)

    @pytest.mark.parametrize("tg", [50e-9, 200e-9])
    def test_two_level_rabi_oracle(self, tg):
        env = PulseEnvelope("cosine", tg, calibrate_pi_half_amplitude(tg))
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        u = evolve(lambda t: 0.5 * env(t) * sx, np.eye(2, dtype=complex), (0, tg), tg / 2000)
        angle = 2 * math.acos(min(1.0, abs(u[0, 0])))
        assert angle == pytest.approx(math.pi / 2, abs=1e-4)


class TestEnvelope:
    def test_cosine_endpoints_and_area(self):
        env = PulseEnvelope("cosine", 50e-9, 1e8)
        assert env(0.0) == 0.0 and abs(env(50e-9)) < 1e-6
        assert env(25e-9) == pytest.approx(1e8)
        area, _ = quad(env, 0, 50e-9, epsabs=0, epsrel=1e-12)
        assert area == pytest.approx(env.area(), rel=1e-10)

    def test_flattop(self):
        env = PulseEnvelope("flattop", 240e-9, 2.0, rise=20e-9, fall=20e-9)
        assert env(120e-9) == 2.0 and env(0.0) == 0.0
        assert env(10e-9) == pytest.approx(1.0)
        area, _ = quad(env, 0, 240e-9, points=[20e-9, 220e-9], epsrel=1e-12)
        assert area == pytest.approx(env.area(), rel=1e-9)

    def test_invalid(self):
        with pytest.raises(PulseError):
            PulseEnvelope("gauss", 1e-9, 1.0)
        with pytest.raises(PulseError):
            PulseEnvelope("flattop", 10e-9, 1.0, rise=6e-9, fall=6e-9)
        with pytest.raises(PulseError):
            TonePulse(PulseEnvelope("cosine", 1e-9, 1.0), 5e9, t0=-1e-9)


class TestGrid:
    def test_snap(self):
        assert snap_to_grid(50e-9) == pytest.approx(50e-9)
        assert snap_to_grid(50.04e-9) == pytest.approx(50e-9)

    def test_too_coarse(self):
        with pytest.raises(PulseError):
            snap_to_grid(1.06e-9)
        with pytest.raises(PulseError):
            snap_to_grid(-1e-9)


class TestSampling:
    def test_superposition_matches_analytic(self):
        env = PulseEnvelope("cosine", 50e-9, 2 * math.pi * 10e6)
        a = TonePulse(env, 5.00e9, 0.3, 0.0)
        b = TonePulse(env, 5.05e9, -1.2, 0.0)
        t, y = LineWaveform("xy", [a, b]).sample(50e9)
        ref = np.array([
            sum(
                p.envelope.peak * 0.5 * (1 - math.cos(2 * math.pi * ti / 50e-9)) * math.cos(2 * math.pi * p.frequency * ti + p.phase)
                for p in (a, b)
            )
            for ti in t
        ])
        assert len(t) == 2501
        assert np.max(np.abs(y - ref)) / env.peak <= 1e-12

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            LineWaveform("x").sample(0)


def plan2():
    return FrequencyPlan(5.0e9, 50 * MHZ, ["q0", "q1"])


class TestSynthesize:
    def test_h_two_pulses(self):
        prog = compile(layerize(circ(1, [{"name": "h", "qubits": [0]}])))
        sched = synthesize(prog, FrequencyPlan(5e9, 50 * MHZ, ["q0"]))
        pulses = sched.lines["xy0"].pulses
        assert len(pulses) == 2
        assert pulses[0].t0 == 0.0 and pulses[1].t0 == pytest.approx(50e-9)
        assert all(p.frequency == 5e9 for p in pulses)

    def test_isomorphic(self):
        prog = compile(layerize(circ(2, [{"name": "x", "qubits": [0]}, {"name": "id", "qubits": [1]}])))
        sched = synthesize(prog, plan2())
        by_q = {}
        for p in sched.lines["xy0"].pulses:
            by_q.setdefault(p.element, []).append(p)
        e0, e1 = by_q["q0"], by_q["q1"]
        assert [(p.t0, p.envelope) for p in e0] == [(p.t0, p.envelope) for p in e1]
        assert [p.phase for p in e0] != [p.phase for p in e1]

    def test_missing_assignment(self):
        prog = compile(layerize(circ(3, [{"name": "x", "qubits": [2]}])))
        with pytest.raises(MissingAssignment):
            synthesize(prog, plan2())
        with pytest.raises(MissingAssignment):
            synthesize(prog, FrequencyPlan(5e9, 50 * MHZ, ["q0", "q1", "q2"]), lines={"a": [0, 1]})

    def test_two_qubit_cycle_timing(self):
        prog = compile(layerize(circ(2, [{"name": "cz", "qubits": [0, 1]}])))
        sched = synthesize(prog, plan2(), TimingConfig(cz_slot=60e-9))
        assert [k for k, _ in sched.cycle_starts] == ["1q", "2q", "1q"]
        assert sched.duration == pytest.approx(100e-9 + 120e-9 + 100e-9)

    def test_dumps_stable(self):
        prog = compile(layerize(circ(2, [{"name": "h", "qubits": [0]}, {"name": "cz", "qubits": [0, 1]}])))
        assert dumps_schedule(synthesize(prog, plan2())) == dumps_schedule(synthesize(prog, plan2()))

    @pytest.mark.parametrize("seed", range(4))
    def test_schedule_unitary_matches_compiled(self, seed):
        rng = np.random.default_rng(seed)
        th, ph, la = rng.uniform(-math.pi, math.pi, 3)
        c = circ(1, [{"name": "u3", "qubits": [0], "params": [th, ph, la]}])
        prog = compile(layerize(c))
        sched = synthesize(prog, FrequencyPlan(5e9, 50 * MHZ, ["q0"]))
        u = rwa_unitary(sched.lines["xy0"].pulses, 5e9, sched.duration, dt=0.05e-9)
        u = rz_matrix(prog.final_frame[0]) @ u
        assert equal_up_to_phase(u, circuit_unitary(c)) <= 1e-6

    def test_phase_shift_by_frame(self):
        # a pulse at carrier phase p realises Rz(-p) SX Rz(p)
        env = PulseEnvelope("cosine", 50e-9, calibrate_pi_half_amplitude(50e-9))
        for p in (0.0, 0.7, -2.1):
            u = rwa_unitary([TonePulse(env, 5e9, p)], 5e9, 50e-9)
            assert equal_up_to_phase(u, pulse_matrix(p)) <= 1e-6
        assert equal_up_to_phase(pulse_matrix(0.0), SX) < 1e-15


class TestElementDrive:
    def setup_method(self):
        env = PulseEnvelope("cosine", 50e-9, 1.0)
        self.plan = plan2()
        self.wave = LineWaveform("xy0", [TonePulse(env, 5.0e9, 0, 0, "q0"), TonePulse(env, 5.05e9, 0, 0, "q1")])

    def drive(self, template):
        line = LineModel.from_plan("xy0", self.plan, template)
        return {p.element: p.envelope.peak for p in element_drive("q0", [self.wave], line, self.plan)}

    def test_ideal(self):
        assert self.drive(FilterSpec(5e9, 50 * MHZ, 3, ideal=True)) == {"q0": 1.0}

    def test_order3(self):
        d = self.drive(FilterSpec(5e9, 50 * MHZ, 3))
        assert d["q0"] == 1.0
        assert d["q1"] == pytest.approx(0.124, abs=5e-4)

    def test_no_attenuation(self):
        # very wide passband approximates the unfiltered line
        d = self.drive(FilterSpec(5e9, 1e12, 3))
        assert d["q1"] == pytest.approx(1.0, abs=1e-9)

    def test_other_line_ignored(self):
        line = LineModel.from_plan("xy1", self.plan, FilterSpec(5e9, 50 * MHZ))
        assert element_drive("q0", [self.wave], line, self.plan) == []


@settings(max_examples=30, deadline=None)
@given(st.floats(-100, 100), st.floats(0, 6.28))
def test_sample_linearity(s, phase):
    env = PulseEnvelope("cosine", 20e-9, 3.0)
    w = LineWaveform("l", [TonePulse(env, 5e9, phase), TonePulse(env, 5.1e9, 0.0, 2e-9)])
    ws = LineWaveform("l", [p.scaled(s) for p in w.pulses])
    _, y = w.sample(20e9)
    _, ys = ws.sample(20e9)
    np.testing.assert_allclose(ys, s * y, rtol=1e-12, atol=1e-12)
