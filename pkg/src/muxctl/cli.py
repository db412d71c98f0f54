"""Command-line front end.

Exit codes: 0 success, 1 I/O, 2 validation, 3 compilation, 4 coupler simulation.
Outputs carry provenance: '#' lines in CSV and a "_meta" object in JSON.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .circuit import CircuitError, layerize, parse_circuit
from .compiler import CompileError, compile as compile_circuit
from .config import ConfigError, DeviceConfig, load as load_device
from .cz import CzError, CouplerSimulator, calibrate_phase, dressed_spectrum, tuning_landscape, zz_vs_coupler
from .leakage import LeakageError, MainPulse, leakage_map
from .mux import MuxError, amplitude_scale, filter_attenuation_db
from .pulses import PulseError, synthesize
from .resources import BudgetSpec, LatticeSpec, ResourceError, system_feasibility
from .sweep import config_hash, default_workers, provenance

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_COMPILE, EXIT_CZ = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_VALIDATION, message)


def _grid(text: str) -> np.ndarray:
    """'fmin,fmax,n' -> linspace."""
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(EXIT_VALIDATION, f"grid {text!r} must be 'min,max,n'")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2])
    except ValueError:
        raise CliError(EXIT_VALIDATION, f"grid {text!r} must be 'min,max,n'") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or n < 1 or hi < lo or (n > 1 and hi == lo):
        raise CliError(EXIT_VALIDATION, f"grid {text!r}: need min < max and n >= 1")
    return np.linspace(lo, hi, n)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot read {path}: {e.strerror or e}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot write {path}: {e.strerror or e}") from None


def _device(path: str) -> tuple[DeviceConfig, str]:
    text = _read(path)
    try:
        from .config import loads

        return loads(text), config_hash(text)
    except ConfigError as e:
        raise CliError(EXIT_VALIDATION, f"{path}: {e}") from None


def _dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _workers(args) -> int:
    try:
        return args.workers if args.workers is not None else default_workers()
    except ValueError as e:
        raise CliError(EXIT_VALIDATION, str(e)) from None


# ---- commands


def cmd_compile(args) -> int:
    dev, dev_hash = _device(args.device)
    ctext = _read(args.circuit)
    try:
        circ = parse_circuit(ctext)
    except CircuitError as e:
        raise CliError(EXIT_VALIDATION, f"{args.circuit}: {e}") from None
    if circ.num_qubits > dev.num_qubits:
        raise CliError(EXIT_VALIDATION, f"circuit uses {circ.num_qubits} qubits, device has {dev.num_qubits}")
    index = {q.id: i for i, q in enumerate(dev.qubits)}
    shared = {m for l in dev.lines if l.role == "coupler-z" for m in l.members}
    idle = [
        tuple(sorted((index[c.pair[0]], index[c.pair[1]])))
        for c in dev.couplers
        if c.id in shared and index[c.pair[0]] < circ.num_qubits and index[c.pair[1]] < circ.num_qubits
    ]
    try:
        lc = layerize(circ, idle)
    except CircuitError as e:
        raise CliError(EXIT_VALIDATION, str(e)) from None
    try:
        prog = compile_circuit(lc, dev.sqrt_cz_sign)
    except CompileError as e:
        raise CliError(EXIT_COMPILE, f"compilation failed: {e}") from None
    lines = {lid: [q for q in qs if q < circ.num_qubits] for lid, qs in dev.xy_lines().items()}
    try:
        sched = synthesize(prog, dev.element_plan(), dev.timing, lines)
    except (PulseError, MuxError) as e:
        raise CliError(EXIT_VALIDATION, str(e)) from None
    out = {
        "_meta": provenance({"device": dev_hash, "circuit": config_hash(ctext)}, None, command="compile"),
        "structure": [kind for kind, _ in lc.structure()],
        "program": prog.to_json(),
        "schedule": sched.to_json(),
    }
    _write(args.output, _dump_json(out))
    return EXIT_OK


def cmd_leakage_map(args) -> int:
    dev, dev_hash = _device(args.device)
    fa = _grid(args.grid)
    q = dev.qubit(args.qubit) if args.qubit else dev.qubits[0]
    spec = q.transmon()
    if np.any(fa <= 0):
        raise CliError(EXIT_VALIDATION, "grid frequencies must be positive")
    att = None
    if not args.no_filter:
        filt = dev.filter_for(q.id)
        if filt is None:
            raise CliError(EXIT_VALIDATION, "device has no filter section; pass --no-filter")
        if filt.ideal:
            att = lambda f: np.zeros_like(np.asarray(f, dtype=float))  # noqa: E731
        else:
            att = lambda f: amplitude_scale(filter_attenuation_db(filt, f))  # noqa: E731
    main = MainPulse(dev.timing.pulse_duration, dev.timing.peak)
    try:
        m = leakage_map(spec, main, fa, fa, att, dt=dev.integrator.get("leakage_dt"), workers=_workers(args))
    except LeakageError as e:
        raise CliError(EXIT_VALIDATION, str(e)) from None
    sw = m.to_sweep()
    sw.meta.update(provenance({"device": dev_hash, "grid": args.grid, "no_filter": args.no_filter, "qubit": q.id}, None, command="leakage-map"))
    _write(args.output, sw.to_csv())
    return EXIT_OK


def _coupler_args(dev: DeviceConfig, args):
    try:
        c = dev.coupler(args.coupler)
        return c, dev.coupler_spec(c.id)
    except ConfigError as e:
        raise CliError(EXIT_VALIDATION, str(e)) from None


def cmd_cz_spectrum(args) -> int:
    dev, dev_hash = _device(args.device)
    _, spec = _coupler_args(dev, args)
    grid = _grid(args.grid)
    sw = zz_vs_coupler(spec, grid)
    sw.meta.update(provenance({"device": dev_hash, "grid": args.grid, "coupler": args.coupler}, None, command="cz-spectrum"))
    _write(args.output, sw.to_csv())
    return EXIT_OK


def cmd_cz_landscape(args) -> int:
    dev, dev_hash = _device(args.device)
    c, spec = _coupler_args(dev, args)
    flux = c.flux()
    w11 = dressed_spectrum(spec, flux.hold, ("101", "111")).coupler_transition(1, 1)
    wd = w11 + _grid(args.detuning)
    amp = 2 * np.pi * _grid(args.rabi)
    land = tuning_landscape(spec, flux, wd, amp, workers=_workers(args), flat_dt=dev.integrator.get("flat_dt", 1e-9))
    leak_sw, phase_sw = land.sweeps()
    out = {
        "_meta": provenance({"device": dev_hash, "detuning": args.detuning, "rabi": args.rabi, "coupler": c.id}, None, command="cz-landscape"),
        "phi_flux_rad": land.phi_flux,
        "omega_c11_hz": w11,
        "leak": leak_sw.to_json(),
        "phase": phase_sw.to_json(),
        "curve": land.curve,
    }
    _write(args.output, _dump_json(out))
    return EXIT_OK


def cmd_cz_tune(args) -> int:
    dev, dev_hash = _device(args.device)
    c, spec = _coupler_args(dev, args)
    flux = c.flux()
    cal = calibrate_phase(spec, flux, args.target, flat_dt=dev.integrator.get("flat_dt", 1e-9))
    out = cal.to_json()
    out["_meta"] = provenance({"device": dev_hash, "target": args.target, "coupler": c.id}, None, command="cz-tune")
    _write(args.output, _dump_json(out))
    return EXIT_OK


def cmd_resources(args) -> int:
    passive = 0.0
    dev_hash = None
    if args.device:
        dev, dev_hash = _device(args.device)
        passive = dev.passive_per_cable_w
    try:
        budget = BudgetSpec(args.band, args.delta_f, args.cables, args.omega_q, args.t1, args.rabi, passive_per_cable_w=passive)
        lattice = LatticeSpec(args.rows, args.cols) if args.rows is not None and args.cols is not None else None
        rep = system_feasibility(budget, args.qubits, lattice, args.scope)
    except ResourceError as e:
        raise CliError(EXIT_VALIDATION, str(e)) from None
    if args.json:
        out = rep.to_json()
        out["_meta"] = provenance({"args": {k: v for k, v in vars(args).items() if k not in ("func", "output")}, "device": dev_hash}, None, command="resources")
        _write(args.output, _dump_json(out))
    else:
        _write(args.output, rep.table() + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="muxctl", description="Multiplexed qubit control toolkit")
    p.add_argument("--version", action="version", version=f"muxctl {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_):
        s = sub.add_parser(name, help=help_)
        s.set_defaults(func=func)
        return s

    s = add("compile", cmd_compile, "compile a circuit into a pulse schedule")
    s.add_argument("--circuit", required=True)
    s.add_argument("--device", required=True)
    s.add_argument("-o", "--output")

    s = add("leakage-map", cmd_leakage_map, "leakage error over two spurious tone frequencies")
    s.add_argument("--device", required=True)
    s.add_argument("--grid", default="4.5e9,5.5e9,32", help="fmin,fmax,n in Hz")
    s.add_argument("--qubit", help="qubit id (default: first qubit)")
    s.add_argument("--no-filter", action="store_true", help="spurious tones arrive unattenuated")
    s.add_argument("--workers", type=int)
    s.add_argument("-o", "--output")

    s = add("cz-spectrum", cmd_cz_spectrum, "ZZ strength and coupler transitions versus coupler frequency")
    s.add_argument("--device", required=True)
    s.add_argument("--coupler")
    s.add_argument("--grid", default="5.7e9,6.5e9,17", help="wc_min,wc_max,n in Hz")
    s.add_argument("-o", "--output")

    s = add("cz-landscape", cmd_cz_landscape, "leakage and conditional phase over drive frequency and strength")
    s.add_argument("--device", required=True)
    s.add_argument("--coupler")
    s.add_argument("--detuning", default="-8e6,8e6,25", help="drive offset from the |11> coupler line: min,max,n in Hz")
    s.add_argument("--rabi", default="0.5e6,12e6,25", help="Omega_d / 2 pi: min,max,n in Hz")
    s.add_argument("--workers", type=int)
    s.add_argument("-o", "--output")

    s = add("cz-tune", cmd_cz_tune, "calibrate a drive for a target conditional phase")
    s.add_argument("--device", required=True)
    s.add_argument("--coupler")
    s.add_argument("--target", type=float, required=True, help="conditional phase in rad")
    s.add_argument("-o", "--output")

    s = add("resources", cmd_resources, "wiring and heat-load feasibility")
    s.add_argument("--qubits", type=int, required=True)
    s.add_argument("--cables", type=int, required=True)
    s.add_argument("--delta-f", type=float, required=True, help="tone spacing in Hz")
    s.add_argument("--band", type=float, required=True, help="usable band W in Hz")
    s.add_argument("--rows", type=int)
    s.add_argument("--cols", type=int)
    s.add_argument("--scope", choices=["qubit-xy", "all"], default="qubit-xy")
    s.add_argument("--omega-q", type=float, default=5e9, help="qubit frequency in Hz")
    s.add_argument("--t1", type=float, default=10e-3)
    s.add_argument("--rabi", type=float, default=1.6e6, help="Omega_d / 2 pi in Hz")
    s.add_argument("--device", help="device file supplying the passive per-cable load")
    s.add_argument("--json", action="store_true")
    s.add_argument("-o", "--output")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as e:
        print(f"muxctl: error: {e}", file=sys.stderr)
        return e.code
    except CzError as e:
        print(f"muxctl: coupler simulation failed: {e}", file=sys.stderr)
        return EXIT_CZ
    except (ConfigError, MuxError, PulseError, CircuitError) as e:
        print(f"muxctl: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
