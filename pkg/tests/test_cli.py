import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from pwdyn import __version__, blocks, cli
from pwdyn.config import ConfigError, parse_config


def base_config(**over):
    cfg = {
        "schema_version": 1,
        "process": {"map": {"kind": "semigroup", "jumps": [{"operator": "sz", "rate": 0.5}]},
                    "channel": {"kind": "pauli", "index": "0"},
                    "waiting_time": {"kind": "erlang", "stages": 2, "rate": 1.0}},
        "grid": {"t_max": 4.0, "steps": 400},
        "engine": {"kind": "volterra"},
    }
    cfg.update(over)
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_columns(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: [r[i] for r in body] for i, h in enumerate(header)}


def run(argv):
    return cli.main(argv)


class TestConfig:
    def test_defaults(self):
        rc = parse_config(base_config())
        assert rc.witness == {"n_random": 32, "seed": 0, "eps_growth": 1e-9}
        assert rc.initial_state is None and rc.process.grid.steps == 400

    @pytest.mark.parametrize("mutate, field", [
        (lambda c: c.update(schema_version=2), "schema_version"),
        (lambda c: c["grid"].update(steps=1), "grid/steps"),
        (lambda c: c["process"]["waiting_time"].update(rate=-2.0), "process/waiting_time/rate"),
        (lambda c: c["engine"].update(turbo=True), "engine"),
        (lambda c: c.update(outputs={}), "<root>"),
        (lambda c: c["process"].update(map={"kind": "damping", "lambda": 1.0}), "process/map"),
        (lambda c: c.update(engine={"kind": "monte_carlo", "n_traj": 10}), "engine"),
        (lambda c: c.update(engine={"kind": "monte_carlo", "n_traj": 10, "seed": 1, "stride": 7}), "engine/stride"),
        (lambda c: c.update(engine={"kind": "closed_form"}), "engine/kind"),
        (lambda c: c["process"].update(channel={"kind": "kraus", "operators": [[[1, 0], [0, 0.5]]]}),
         "process/channel"),
        (lambda c: c.update(initial_state={"bloch": [1, 1, 0]}), "initial_state/bloch"),
        (lambda c: c.update(initial_state={"matrix": [[1, 0], [0, 1]]}), "initial_state/matrix"),
        (lambda c: c["process"]["map"].update(hamiltonian={"re": [[0, 1], [0, 0]]}), "process/map"),
    ])
    def test_errors_name_field(self, mutate, field):
        cfg = base_config()
        mutate(cfg)
        with pytest.raises(ConfigError, match=f"'{field}'"):
            parse_config(cfg)

    def test_matrix_forms(self):
        cfg = base_config()
        cfg["process"]["map"] = {"kind": "semigroup", "hamiltonian": {"re": [[0, 0], [0, 0]], "im": [[0, -1], [1, 0]]},
                                 "jumps": [{"operator": [[0, 0], [1, 0]], "rate": 0.3}]}
        cfg["initial_state"] = {"matrix": {"re": [[0.5, 0.5], [0.5, 0.5]]}}
        rc = parse_config(cfg)
        np.testing.assert_allclose(rc.process.F.lindblad.hamiltonian, blocks.OPERATORS["sy"])
        np.testing.assert_allclose(rc.process.F.lindblad.jumps[0], blocks.OPERATORS["sm"])

    def test_missing_file(self, tmp_path):
        assert run(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o.csv")]) == 2

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        assert run(["simulate", "--config", str(p), "--out", str(tmp_path / "o.csv")]) == 2


class TestSimulate:
    def test_semigroup_column(self, tmp_path):
        out = tmp_path / "s.csv"
        assert run(["simulate", "--config", write(tmp_path, base_config()), "--out", str(out)]) == 0
        cols = read_columns(out)
        assert list(cols)[:17] == ["t"] + [f"L{i}{j}" for i in range(4) for j in range(4)]
        t = np.array(cols["t"], dtype=float)
        assert np.abs(np.array(cols["L11"], dtype=float) - np.exp(-2 * 0.5 * t)).max() <= 1e-6

    def test_identity(self, tmp_path):
        cfg = base_config()
        cfg["process"]["map"] = {"kind": "identity"}
        out = tmp_path / "i.csv"
        assert run(["simulate", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
        cols = read_columns(out)
        for i in range(4):
            for j in range(4):
                # the renewal sum reaches 1 only up to accumulated rounding
                got = np.array(cols[f"L{i}{j}"], dtype=float)
                assert np.abs(got - float(i == j)).max() <= 1e-12

    def test_state_columns_and_metadata(self, tmp_path):
        cfg = base_config(initial_state={"bloch": [0.6, 0, 0.8]})
        out = tmp_path / "st.csv"
        assert run(["simulate", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
        cols = read_columns(out)
        assert float(cols["rho00_re"][0]) == pytest.approx(0.9, abs=1e-15)
        assert float(cols["rho01_re"][0]) == pytest.approx(0.3, abs=1e-15)
        meta = json.loads((tmp_path / "st.csv.meta.json").read_text())
        assert meta["version"] == __version__ and meta["config"] == cfg
        assert meta["process"]["f"]["rate_convention"] == "per-stage"
        assert "wall_time_s" in meta

    def test_seventeen_digits(self, tmp_path):
        cfg = base_config()
        cfg["process"]["map"] = {"kind": "damping", "lambda": 1.0, "gamma": 3.0}
        cfg["process"]["channel"] = {"kind": "pauli", "index": "x"}
        out = tmp_path / "d.csv"
        assert run(["simulate", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
        rc = parse_config(cfg)
        maps = cli.run_engine(rc).maps
        text = out.read_text()
        assert ";" not in text and "," in text.splitlines()[0]
        cols = read_columns(out)
        got = np.array(cols["L11"], dtype=float)
        assert np.array_equal(got, maps[:, 1, 1])  # exact round trip
        assert any(len(v.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) == 17 for v in cols["L11"])

    @pytest.mark.parametrize("engine", [{"kind": "closed_form"}, {"kind": "master_equation"}])
    def test_engines_agree(self, tmp_path, engine):
        cfg = base_config(grid={"t_max": 4.0, "steps": 4000})
        cfg["process"]["map"] = {"kind": "dephasing", "lambda": 1.0}
        cfg["process"]["channel"] = {"kind": "pauli", "index": "x"}
        ref = cli.run_engine(parse_config(cfg)).maps
        other = cli.run_engine(parse_config(dict(cfg, engine=engine))).maps
        assert np.abs(ref - other).max() <= 1e-4

    def test_monte_carlo_deterministic(self, tmp_path):
        cfg = base_config(engine={"kind": "monte_carlo", "n_traj": 12_000, "seed": 5, "stride": 10})
        cfg["process"]["map"] = {"kind": "damping", "lambda": 1.0, "gamma": 3.0}
        cfg["process"]["channel"] = {"kind": "pauli", "index": "x"}
        path = write(tmp_path, cfg)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(["simulate", "--config", path, "--out", str(a)]) == 0
        assert run(["simulate", "--config", path, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
        assert meta["seeds"]["monte_carlo"] == 5 and meta["max_stderr"] > 0

    def test_engine_failure_exit_code(self, tmp_path, capsys):
        cfg = base_config()
        cfg["process"]["waiting_time"] = {"kind": "exponential", "rate": 1000.0}
        assert run(["simulate", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "x.csv")]) == 3
        assert "engine error" in capsys.readouterr().err

    def test_config_failure_exit_code(self, tmp_path, capsys):
        cfg = base_config(grid={"t_max": 4.0, "steps": 1})
        assert run(["simulate", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "x.csv")]) == 2
        assert "grid/steps" in capsys.readouterr().err


class TestWitness:
    def summary(self, tmp_path, cfg):
        out = tmp_path / "w.csv"
        assert run(["witness", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
        return json.loads((tmp_path / "w.csv.summary.json").read_text()), read_columns(out)

    def test_semigroup(self, tmp_path):
        s, cols = self.summary(tmp_path, base_config())
        assert s["detected"] is False and s["nm_measure"] <= 1e-8
        assert list(cols) == ["pair", "t", "D", "dD_forward", "growing"]
        assert len(set(cols["pair"])) == 3 + 32

    def test_dephasing_detected(self, tmp_path):
        cfg = base_config(grid={"t_max": 15.0, "steps": 1500})
        cfg["process"] = {"map": {"kind": "dephasing", "lambda": 1.0}, "channel": {"kind": "pauli", "index": "x"},
                          "waiting_time": {"kind": "erlang", "stages": 3, "rate": 0.5}}
        s, cols = self.summary(tmp_path, cfg)
        assert s["detected"] is True and s["best_pair"] in s["intervals"]
        growing = np.array(cols["growing"], dtype=int)
        dd = np.array(cols["dD_forward"], dtype=float)
        assert np.array_equal(growing == 1, np.nan_to_num(dd, nan=0.0) > 1e-9)

    def test_jump_free_below_threshold(self, tmp_path):
        cfg = base_config(grid={"t_max": 20.0, "steps": 20000})
        cfg["process"] = {"map": {"kind": "damping", "lambda": 1.0, "gamma": 0.4},
                          "channel": {"kind": "pauli", "index": "0"}, "waiting_time": {"kind": "none"}}
        s, _ = self.summary(tmp_path, cfg)
        assert s["detected"] is False and s["witness_functions"]["detected"] is False


class TestSurface:
    def test_dephasing(self, tmp_path):
        out = tmp_path / "s.csv"
        assert run(["surface", "--example", "dephasing", "--ratio-min", "0.5", "--ratio-max", "20",
                    "--ratio-steps", "4", "--out", str(out)]) == 0
        cols = read_columns(out)
        assert list(cols) == ["lambda_t", "ratio", "layer", "value"]
        assert len(cols["value"]) == 4 * 150 * 2
        assert cols["layer"][:2] == ["abs_d_minus", "abs_q"]
        assert all(v == "1" for t, v in zip(cols["lambda_t"], cols["value"]) if t == "0")
        ratios = np.array(cols["ratio"], dtype=float)
        assert np.all(np.diff(ratios) >= 0)
        summary = json.loads((tmp_path / "s.csv.summary.json").read_text())
        measures = [r["nm_measure"] for r in summary["abs_d_minus"]]
        assert all(a >= b for a, b in zip(measures, measures[1:]))
        assert all(r["detected"] for r in summary["abs_q"])

    def test_damping(self, tmp_path):
        out = tmp_path / "d.csv"
        assert run(["surface", "--example", "damping", "--ratio-steps", "5", "--out", str(out)]) == 0
        summary = json.loads((tmp_path / "d.csv.summary.json").read_text())
        starts = [r["first_growth_start"] for r in summary["abs_h_plus"]]
        assert all(a > b for a, b in zip(starts, starts[1:]))
        meta = json.loads((tmp_path / "d.csv.meta.json").read_text())
        assert meta["params"]["gamma_over_lambda"] == 3.0

    @pytest.mark.parametrize("args", [["--tmax", "0"], ["--ratio-min", "-1"], ["--tsteps", "1"]])
    def test_bad_ranges(self, tmp_path, args):
        assert run(["surface", "--example", "dephasing", *args, "--out", str(tmp_path / "x.csv")]) == 2


class TestValidate:
    def test_quick_passes(self, capsys):
        assert run(["validate", "--level", "quick"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] and all(c["passed"] for c in report["checks"])

    def test_sign_flip_detected(self, monkeypatch, capsys):
        orig = blocks.PauliChannel.epsilons
        monkeypatch.setattr(blocks.PauliChannel, "epsilons",
                            property(lambda self: orig.fget(self) * np.array([1, -1, 1, 1])))
        assert run(["validate", "--level", "quick"]) == 4
        failed = {c["name"] for c in json.loads(capsys.readouterr().out)["checks"] if not c["passed"]}
        assert "volterra_cpt" in failed or "closed_form_vs_volterra" in failed

    def test_report_file(self, tmp_path, capsys):
        path = tmp_path / "r.json"
        assert run(["validate", "--report", str(path)]) == 0
        assert json.loads(path.read_text())["level"] == "quick"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pwdyn", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
