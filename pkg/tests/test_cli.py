"""Experiment runner: config parsing, exit codes, artifacts, determinism."""

import json

import numpy as np
import pytest

from dbarlab import cli
from dbarlab.core import GridSpec, read_field
from dbarlab.datums import gaussian
from dbarlab.evolution import IFRK4, model_mnv, stability_bound


def write_toml(path, text):
    path.write_text(text)
    return str(path)


BASE_EVOLVE = """
[grid]
n = 32
L = 6.0

[datum]
family = "gaussian"
amplitude = 0.3

[evolve]
times = [0.0, 0.002]
scheme = "IFRK4"

[run]
workers = 1
"""


class TestConfig:
    def test_toml_and_json_equivalent(self, tmp_path):
        toml_cfg = cli.build_config(
            "evolve", write_toml(tmp_path / "a.toml", BASE_EVOLVE), {}
        )
        raw = {
            "grid": {"n": 32, "L": 6.0},
            "datum": {"family": "gaussian", "amplitude": 0.3},
            "evolve": {"times": [0.0, 0.002], "scheme": "IFRK4"},
            "run": {"workers": 1},
        }
        jpath = tmp_path / "a.json"
        jpath.write_text(json.dumps(raw))
        json_cfg = cli.build_config("evolve", str(jpath), {})
        assert toml_cfg == json_cfg

    def test_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DBARLAB_RUN_WORKERS", "3")
        cfg = cli.build_config(
            "evolve", write_toml(tmp_path / "a.toml", BASE_EVOLVE), {}
        )
        assert cfg.workers == 3

    def test_unknown_key_rejected(self, tmp_path):
        bad = BASE_EVOLVE + "\n[grid2]\nn = 2\n"
        with pytest.raises(Exception):
            cli.build_config("evolve", write_toml(tmp_path / "b.toml", bad), {})

    def test_hash_stable(self, tmp_path):
        c1 = cli.build_config(
            "evolve", write_toml(tmp_path / "a.toml", BASE_EVOLVE), {}
        )
        c2 = cli.build_config(
            "evolve", write_toml(tmp_path / "b.toml", BASE_EVOLVE), {}
        )
        assert c1.hash() == c2.hash()


class TestEvolveCommand:
    def test_smoke_and_artifacts(self, tmp_path):
        cfg = write_toml(tmp_path / "cfg.toml", BASE_EVOLVE)
        out = tmp_path / "run1"
        rc = cli.main(["evolve", "--config", cfg, "--out", str(out)])
        assert rc == 0
        assert (out / "run.json").exists()
        assert (out / "summary.json").exists()
        assert (out / "trajectory" / "manifest.json").exists()
        states = sorted((out / "trajectory").glob("state_*.f2d1"))
        assert len(states) >= 2

    def test_dt_above_bound_exits_2(self, tmp_path, capsys):
        cfg_text = BASE_EVOLVE + "\n"
        cfg = write_toml(tmp_path / "cfg.toml", cfg_text)
        bound = stability_bound(model_mnv(GridSpec(32, 6.0)), IFRK4)
        import os

        os.environ["DBARLAB_EVOLVE_DT"] = str(bound * 10)
        try:
            rc = cli.main(["evolve", "--config", cfg, "--out",
                           str(tmp_path / "o")])
        finally:
            del os.environ["DBARLAB_EVOLVE_DT"]
        assert rc == 2
        err = capsys.readouterr().err
        assert "stability bound" in err

    def test_blow_up_exits_4_with_bracket(self, tmp_path, capsys):
        cfg = write_toml(
            tmp_path / "cfg.toml",
            """
[grid]
n = 32
L = 6.0

[model]
tag = "NV"

[datum]
family = "nv_focusing"
amplitude = 2000.0

[evolve]
times = [0.0, 0.02]

[run]
workers = 1
""",
        )
        out = tmp_path / "blow"
        rc = cli.main(["evolve", "--config", cfg, "--out", str(out)])
        assert rc == 4
        assert "blow-up detected in t in [" in capsys.readouterr().out
        summary = json.loads((out / "summary.json").read_text())
        assert summary["blow_up"] is not None

    def test_determinism_bitwise(self, tmp_path):
        cfg = write_toml(tmp_path / "cfg.toml", BASE_EVOLVE)
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        assert cli.main(["evolve", "--config", cfg, "--out", str(out1)]) == 0
        assert cli.main(["evolve", "--config", cfg, "--out", str(out2)]) == 0
        for p1 in sorted((out1 / "trajectory").glob("state_*.f2d1")):
            p2 = out2 / "trajectory" / p1.name
            assert p1.read_bytes() == p2.read_bytes()
        assert (out1 / "summary.json").read_text() == (
            out2 / "summary.json"
        ).read_text()


SCATTER_CFG = """
[grid]
n = 32
L = 6.0

[kgrid]
nk = 8
K = 2.0

[datum]
family = "gaussian"
amplitude = 0.4

[tolerances]
tol = 1e-8

[scatter]
invert = false

[run]
workers = 1
"""


class TestScatterCommand:
    def test_zero_field_all_zero(self, tmp_path):
        cfg = write_toml(
            tmp_path / "cfg.toml",
            SCATTER_CFG.replace('amplitude = 0.4', 'amplitude = 0.0'),
        )
        out = tmp_path / "s0"
        rc = cli.main(["scatter", "--config", cfg, "--out", str(out)])
        assert rc == 0
        s = read_field(out / "scattering.f2d1")
        assert np.all(s.values == 0)

    def test_smoke_with_summary(self, tmp_path):
        cfg = write_toml(tmp_path / "cfg.toml", SCATTER_CFG)
        out = tmp_path / "s1"
        rc = cli.main(["scatter", "--config", cfg, "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert 0.9 <= summary["plancherel_ratio"] <= 1.1
        assert summary["status"] == "ok"

    def test_wide_datum_surfaces_warning(self, tmp_path):
        cfg = write_toml(
            tmp_path / "cfg.toml",
            SCATTER_CFG.replace('amplitude = 0.4', 'amplitude = 0.4\nwidth = 3.5'),
        )
        out = tmp_path / "s2"
        rc = cli.main(["scatter", "--config", cfg, "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert any("tail mass" in w for w in summary["warnings"])


class TestMiuraSpectrumCommands:
    def test_miura_roundtrip_gate(self, tmp_path):
        cfg = write_toml(
            tmp_path / "cfg.toml",
            """
[grid]
n = 32
L = 6.0

[datum]
family = "constrained_gaussian"
amplitude = 0.3
width2 = 1.2

[tolerances]
newton_tol = 1e-11

[gates]
roundtrip = 1e-8

[run]
workers = 1
""",
        )
        out = tmp_path / "m"
        rc = cli.main(["miura", "--config", cfg, "--out", str(out)])
        assert rc == 0
        rep = json.loads((out / "classifier.json").read_text())
        assert rep["newton_status"] == "converged"
        assert rep["roundtrip_error"] <= 1e-8
        assert {"lambda_min", "certificate_residual", "F_history",
                "q_integral"} <= set(rep)

    def test_spectrum_zero_potential(self, tmp_path):
        cfg = write_toml(
            tmp_path / "cfg.toml",
            """
[grid]
n = 32
L = 6.0

[datum]
family = "gaussian"
amplitude = 0.0

[run]
workers = 1
""",
        )
        out = tmp_path / "sp"
        rc = cli.main(["spectrum", "--config", cfg, "--out", str(out)])
        assert rc == 0
        rep = json.loads((out / "classifier.json").read_text())
        assert abs(rep["lambda_min"]) <= 1e-6


class TestGnScanCommand:
    def test_small_ensemble(self, tmp_path):
        cfg = write_toml(
            tmp_path / "cfg.toml",
            """
[grid]
n = 32
L = 6.0

[kgrid]
nk = 8
K = 2.0

[gn]
count = 2
amplitude = 0.3

[run]
workers = 1
""",
        )
        out = tmp_path / "gn"
        rc = cli.main(["gn-scan", "--config", cfg, "--out", str(out)])
        assert rc == 0
        lines = (out / "gn_ratios.csv").read_text().splitlines()
        assert lines[0].startswith("run_id,name,s,p,r,q,value")
        assert len(lines) == 3


class TestValidateCommand:
    def test_quick_subset(self, tmp_path, capsys):
        cfg = write_toml(
            tmp_path / "cfg.toml",
            """
[validate]
scale = "quick"
criteria = ["A13", "A14"]

[run]
workers = 1
""",
        )
        out = tmp_path / "v"
        rc = cli.main(["validate", "--config", cfg, "--out", str(out)])
        text = capsys.readouterr().out
        assert "A13" in text and "A14" in text
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["passed"] is True


class TestBadUsage:
    def test_missing_config_file(self, capsys):
        rc = cli.main(["evolve", "--config", "/nonexistent.toml"])
        assert rc == 2
        assert "configuration error" in capsys.readouterr().err
