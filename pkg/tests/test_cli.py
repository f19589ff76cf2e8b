import csv
import json
import math

import numpy as np
import pytest

from cavitydamp.cli import main
from cavitydamp.io import config_to_json, rho_from_json, state_to_json
from cavitydamp.protocol import two_atom_config, vogel_solve


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture
def state_file(tmp_path):
    v = np.array([0.6, 0.48j, 0.64])
    return write(tmp_path / "state.json", state_to_json(v))


def read_rho(path):
    return rho_from_json({k: v for k, v in json.loads(path.read_text()).items() if k != "provenance"})


class TestDamp:
    def test_methods_agree(self, tmp_path, state_file):
        rhos = []
        for method in ("closed-form", "dilation", "kraus"):
            out = tmp_path / f"{method}.json"
            assert main(["damp", "--state", str(state_file), "--gamma", "2", "--t", "0.3",
                         "--delta-omega", "1.5", "--method", method, "--out", str(out)]) == 0
            rhos.append(read_rho(out))
        np.testing.assert_allclose(rhos[0], rhos[1], atol=1e-12)
        np.testing.assert_allclose(rhos[0], rhos[2], atol=1e-12)

    def test_half_life(self, tmp_path):
        src = write(tmp_path / "one.json", state_to_json([0, 1]))
        out = tmp_path / "out.json"
        assert main(["damp", "--state", str(src), "--gamma", "1", "--t", str(math.log(2)), "--out", str(out)]) == 0
        np.testing.assert_allclose(read_rho(out), np.diag([0.5, 0.5]), atol=1e-14)

    def test_zero_time(self, tmp_path, state_file):
        out = tmp_path / "out.json"
        assert main(["damp", "--state", str(state_file), "--gamma", "1", "--t", "0", "--out", str(out)]) == 0
        v = np.array([0.6, 0.48j, 0.64])
        np.testing.assert_allclose(read_rho(out), np.outer(v, v.conj()), atol=1e-15)
        prov = json.loads(out.read_text())["provenance"]
        assert prov["command"] == "damp"
        assert prov["parameters"]["gamma"] == 1.0

    def test_unnormalized(self, tmp_path, capsys):
        src = write(tmp_path / "bad.json", state_to_json([1, 1]))
        assert main(["damp", "--state", str(src), "--gamma", "1", "--t", "1", "--out", str(tmp_path / "o")]) == 2
        assert "normalized" in capsys.readouterr().err

    def test_negative_gamma(self, tmp_path, state_file):
        assert main(["damp", "--state", str(state_file), "--gamma", "-1", "--t", "1",
                     "--out", str(tmp_path / "o")]) == 2


def ideal_config(tmp_path):
    target = np.ones(3) / math.sqrt(3)
    e1, e2 = vogel_solve(target, [1.3, 1.2])
    return write(tmp_path / "cfg.json", config_to_json(two_atom_config(e1, e2, 1.3, 1.2, 0.0, 0, 0)))


class TestEngineer:
    @pytest.mark.parametrize("engine", ["oracle", "dilation"])
    def test_ideal(self, tmp_path, engine):
        out = tmp_path / "res.json"
        assert main(["engineer", str(ideal_config(tmp_path)), "--engine", engine, "--out", str(out)]) == 0
        res = json.loads(out.read_text())
        assert res["fidelity"] == pytest.approx(1, abs=1e-9)
        assert res["rate"] == pytest.approx(res["total_probability"] * res["fidelity"])
        assert len(res["step_probabilities"]) == 2

    def test_failed_postselection(self, tmp_path, capsys):
        cfg = config_to_json(two_atom_config(0, 0, math.pi, 1.0, 0.0, 0, 0))
        assert main(["engineer", str(write(tmp_path / "c.json", cfg)), "--out", str(tmp_path / "o")]) == 3
        assert "step 0" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        cfg = config_to_json(two_atom_config(0, 0, 1.0, 1.0, 0.0, 0, 0))
        cfg["steps"][0]["detuning"] = 1.0
        assert main(["engineer", str(write(tmp_path / "c.json", cfg)), "--out", str(tmp_path / "o")]) == 2
        assert "detuning" in capsys.readouterr().err

    def test_syntax_error_context(self, tmp_path, capsys):
        bad = tmp_path / "c.json"
        bad.write_text('{\n  "gamma": 1.0,\n  "steps": [,]\n}\n')
        assert main(["engineer", str(bad), "--out", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert f"{bad}:3:" in err
        assert '"steps": [,]' in err

    def test_missing_file(self, tmp_path):
        assert main(["engineer", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


def test_rho_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(5)
    rho = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    from cavitydamp.io import dump_json, load_json, rho_to_json

    path = tmp_path / "r.json"
    dump_json(rho_to_json(rho), path)
    back = rho_from_json(load_json(path))
    assert np.array_equal(back, rho)


def test_wigner_vacuum(tmp_path):
    src = write(tmp_path / "vac.json", state_to_json([1, 0]))
    out, hist = tmp_path / "w.csv", tmp_path / "h.csv"
    assert main(["wigner", "--state", str(src), "--q-range", "-1", "1", "--p-range", "-1", "1",
                 "--step", "0.5", "--out", str(out), "--hist-out", str(hist)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 25
    peak = max(rows, key=lambda r: float(r["w"]))
    assert (float(peak["q"]), float(peak["p"])) == (0.0, 0.0)
    assert float(peak["w"]) == pytest.approx(2 / math.pi, abs=1e-12)
    assert len(hist.read_text().splitlines()) == 5
    assert json.loads((tmp_path / "w.csv.meta.json").read_text())["command"] == "wigner"


def test_wigner_from_config(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["wigner", "--config", str(ideal_config(tmp_path)), "--step", "1", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 50


def test_optimize(tmp_path):
    out = tmp_path / "opt.json"
    assert main(["optimize", "--g-tau1", "1.3", "--g-tau2", "1.2", "--gamma", "0", "--starts", "2",
                 "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["fidelity"] >= 1 - 1e-6
    assert res["provenance"]["parameters"]["starts"] == 2


def test_sweep(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--g-tau1", "1.0", "1.3", "0.3", "--g-tau2", "1.2", "1.5", "0.3",
                 "--starts", "2", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    for r in rows:
        assert float(r["R"]) == pytest.approx(float(r["P"]) * float(r["F"]), rel=1e-15)
    meta = json.loads((tmp_path / "s.csv.meta.json").read_text())
    assert meta["parameters"]["seed"] == 0


def test_sweep_bad_step(tmp_path):
    assert main(["sweep", "--g-tau1", "1", "2", "0", "--g-tau2", "1", "2", "1", "--out", str(tmp_path / "s")]) == 2


def test_table1(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["table1", "--starts", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[:2] == ["g_tau1", "g_tau2"]
    assert len(lines) == 4
    assert len(json.loads((tmp_path / "t.csv.meta.json").read_text())["parameters"]["published"]) == 3


def test_bad_usage():
    with pytest.raises(SystemExit) as exc:
        main(["damp"])
    assert exc.value.code == 2


def test_seed_env(monkeypatch):
    from cavitydamp.cli import build_parser

    monkeypatch.setenv("CAVITYDAMP_SEED", "11")
    args = build_parser().parse_args(["optimize", "--g-tau1", "1", "--g-tau2", "1", "--out", "x"])
    assert args.seed == 11
