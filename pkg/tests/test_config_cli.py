import copy
import json
import subprocess
import sys
from pathlib import Path

import pytest

from muxctl import cli
from muxctl.cli import EXIT_COMPILE, EXIT_CZ, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from muxctl.compiler import CompileError
from muxctl.config import ConfigError, from_dict, load, loads
from muxctl.sweep import WORKERS_ENV, SweepResult

ROOT = Path(__file__).resolve().parents[1]
DEVICE = ROOT / "configs" / "two_qubit.json"
BELL = ROOT / "configs" / "bell.json"


def device_dict():
    return json.loads(DEVICE.read_text())


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


class TestConfig:
    def test_load_sample(self):
        dev = load(DEVICE)
        assert dev.num_qubits == 2
        assert dev.drive_frequency("q0") == pytest.approx(5.3e9)
        spec = dev.coupler_spec("c01")
        assert spec.levels == (4, 4, 4)
        assert dev.coupler("c01").flux().hold == 5.72e9

    def test_bundled_configs_parse(self):
        for p in (ROOT / "configs").glob("*.json"):
            if p.name == "bell.json":
                continue
            load(p)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d["qubits"].append(dict(d["qubits"][0])),
            lambda d: d["couplers"][0].update(pair=["q0", "q7"]),
            lambda d: d["lines"].append({"id": "xy1", "role": "qubit-xy", "members": ["q0"]}),
            lambda d: d["lines"][0].update(role="readout"),
            lambda d: d["plan"].update(elements=["q1", "q9"]),
            lambda d: d["plan"].update(spacing=2e9),
            lambda d: d["plan"].update(base_frequency=4.0e9),
            lambda d: d["compiler"].update(sqrt_cz_sign=2),
            lambda d: d["qubits"][0].pop("frequency"),
            lambda d: d["qubits"][0].update(frequency="fast"),
            lambda d: d.update(qubits=[]),
        ],
    )
    def test_validation_errors(self, mutate):
        d = device_dict()
        mutate(d)
        with pytest.raises(ConfigError):
            from_dict(d)

    def test_bad_json_reports_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            loads('{\n  "qubits": [,\n}')

    def test_input_not_mutated(self):
        d = device_dict()
        before = copy.deepcopy(d)
        from_dict(d)
        assert d == before


class TestExitCodes:
    def test_compile_ok(self, tmp_path, capsys):
        out = tmp_path / "out.json"
        assert main(["compile", "--circuit", str(BELL), "--device", str(DEVICE), "-o", str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["structure"] == ["1q", "2q", "1q"]
        assert set(doc) == {"_meta", "structure", "program", "schedule"}

    def test_missing_file(self, tmp_path):
        assert main(["compile", "--circuit", str(tmp_path / "nope.json"), "--device", str(DEVICE)]) == EXIT_IO

    def test_unwritable_output(self, tmp_path):
        rc = main(["compile", "--circuit", str(BELL), "--device", str(DEVICE), "-o", str(tmp_path / "no" / "dir" / "x.json")])
        assert rc == EXIT_IO

    def test_bad_circuit(self, tmp_path):
        c = write(tmp_path, "c.json", {"num_qubits": 2, "gates": [{"name": "x", "qubits": [9]}]})
        assert main(["compile", "--circuit", c, "--device", str(DEVICE)]) == EXIT_VALIDATION

    def test_too_many_qubits(self, tmp_path):
        c = write(tmp_path, "c.json", {"num_qubits": 3, "gates": []})
        assert main(["compile", "--circuit", c, "--device", str(DEVICE)]) == EXIT_VALIDATION

    def test_bad_device(self, tmp_path):
        d = write(tmp_path, "d.json", "{broken")
        assert main(["compile", "--circuit", str(BELL), "--device", d]) == EXIT_VALIDATION

    def test_compile_failure_code(self, monkeypatch):
        def boom(*a, **k):
            raise CompileError("synthetic")

        monkeypatch.setattr(cli, "compile_circuit", boom)
        assert main(["compile", "--circuit", str(BELL), "--device", str(DEVICE)]) == EXIT_COMPILE

    def test_cz_failure_code(self, tmp_path):
        d = device_dict()
        d["couplers"][0]["levels"] = 9
        p = write(tmp_path, "d.json", d)
        assert main(["cz-spectrum", "--device", p, "--grid", "5.8e9,6e9,2"]) == EXIT_CZ

    @pytest.mark.parametrize("grid", ["1,2", "5e9,4e9,3", "a,b,c", "5e9,6e9,0"])
    def test_bad_grid(self, grid):
        assert main(["cz-spectrum", "--device", str(DEVICE), "--grid", grid]) == EXIT_VALIDATION

    def test_unknown_coupler(self):
        assert main(["cz-spectrum", "--device", str(DEVICE), "--coupler", "c99"]) == EXIT_VALIDATION

    def test_missing_required_flag(self):
        assert main(["resources", "--qubits", "10", "--cables", "1", "--delta-f", "1e7"]) == EXIT_VALIDATION

    def test_unknown_command(self):
        assert main(["frobnicate"]) == EXIT_VALIDATION

    def test_bad_workers_env(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, "zero")
        assert main(["leakage-map", "--device", str(DEVICE), "--grid", "4.9e9,5.1e9,1"]) == EXIT_VALIDATION

    def test_console_script(self):
        r = subprocess.run([sys.executable, "-m", "muxctl.cli", "resources", "--qubits", "100000", "--cables", "1000", "--delta-f", "1e7", "--band", "1e9"],
                           capture_output=True, text=True)
        assert r.returncode == 0
        assert "feasible" in r.stdout and "yes" in r.stdout


class TestOutputs:
    def test_resources_json(self, capsys):
        assert main(["resources", "--qubits", "100000", "--cables", "1000", "--delta-f", "1e7", "--band", "1e9", "--json"]) == 0
        d = json.loads(capsys.readouterr().out)
        assert d["feasible"] and d["multiplicity"] == 100
        assert "readout lines excluded from all counts" in d["notes"]
        assert main(["resources", "--qubits", "100000", "--cables", "1000", "--delta-f", "1e7", "--band", "1e8", "--json"]) == 0
        assert not json.loads(capsys.readouterr().out)["feasible"]

    def test_spectrum_csv_roundtrip_and_rerun_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["cz-spectrum", "--device", str(DEVICE), "--grid", "5.8e9,6.2e9,3"]
        assert main(args + ["-o", str(a)]) == 0
        assert main(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        sw = SweepResult.from_csv(a.read_text())
        assert sw.shape == (3,)
        assert sw.meta["command"] == "cz-spectrum"
        assert SweepResult.from_csv(sw.to_csv()).to_csv() == sw.to_csv()

    def test_leakage_map_workers_identical(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["leakage-map", "--device", str(DEVICE), "--grid", "4.8e9,5.2e9,2", "--qubit", "q1", "--no-filter"]
        monkeypatch.setenv(WORKERS_ENV, "1")
        assert main(args + ["-o", str(a)]) == 0
        monkeypatch.setenv(WORKERS_ENV, "2")
        assert main(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        sw = SweepResult.from_csv(a.read_text())
        assert sw.shape == (2, 2)
        assert sw.values["leakage_error"][0, 1] >= 0.1
