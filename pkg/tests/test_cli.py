import json

import numpy as np
import pytest

from fiberlab.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, ConfigError, ExperimentConfig, main
from fiberlab.fields import gamma_of
from fiberlab.cones import GrassmannSection
from fiberlab.measures import make_measure


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.delenv("FIBERLAB_OUTPUT_DIR", raising=False)
    return tmp_path


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"suite": "segment", "bogus": 1})


def test_config_rejects_unknown_suite():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"suite": "nope"})


def test_randomized_suite_needs_seed():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"suite": "exact-ot"})
    assert ExperimentConfig.from_dict({"suite": "exact-ot", "seed": 1}).seed == 1


def test_digest_is_stable():
    a = ExperimentConfig.from_dict({"suite": "segment", "params": {"n": 50}})
    b = ExperimentConfig.from_dict({"params": {"n": 50}, "suite": "segment"})
    assert a.digest() == b.digest()


def test_verify_writes_manifest(outdir, capsys):
    code = main(["verify", "closedness", "--output-dir", str(outdir)])
    assert code == EXIT_OK
    manifest = json.loads((outdir / "closedness-manifest.json").read_text())
    assert manifest["passed"] is True
    assert len(manifest["config_sha256"]) == 64
    assert (outdir / "closedness-weak_escape.csv").exists()
    assert "PASS" in capsys.readouterr().out


def test_verify_env_overrides_output(tmp_path, monkeypatch):
    monkeypatch.setenv("FIBERLAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["verify", "blowup", "--output-dir", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "env" / "blowup-manifest.json").exists()


def test_verify_failing_check_exits_one(outdir):
    cfg = _write(outdir / "cfg.json", {"suite": "blowup", "tolerances": {"final": -1.0}})
    assert main(["verify", "blowup", "--config", cfg, "--output-dir", str(outdir)]) == EXIT_FAIL


def test_bad_config_exits_two(outdir):
    cfg = _write(outdir / "cfg.json", {"suite": "segment", "unknown": True})
    assert main(["verify", "segment", "--config", cfg]) == EXIT_CONFIG
    assert main(["verify", "no-such-suite"]) == EXIT_CONFIG
    assert main(["verify", "exact-ot", "--output-dir", str(outdir)]) == EXIT_CONFIG


def test_gen_and_ot(outdir, capsys):
    src = outdir / "a.json"
    assert main(["gen", "segment", "--params", '{"n": 4}', "--out", str(src)]) == EXIT_OK
    desc = json.loads(src.read_text())
    assert desc["dim"] == 2 and len(desc["points"]) == 4
    tgt = _write(outdir / "b.json", {"type": "atoms", "points": [[0.5, 1.0]]})
    plan = outdir / "plan.csv"
    assert main(["ot", str(src), tgt, "--out", str(plan)]) == EXIT_OK
    assert plan.read_text().splitlines()[0] == "i,j,mass,x0,x1,y0,y1"
    assert main(["gen", "unknown-fixture"]) == EXIT_CONFIG


def test_dot_and_wmu(outdir, capsys):
    mu = make_measure([[0.0, 0.0], [1.0, 0.0]])
    f = np.array([[1.0, 0.0], [0.0, 2.0]])
    a = _write(outdir / "a.json", gamma_of(f, mu).to_dict())
    b = _write(outdir / "b.json", gamma_of(2 * f, mu).to_dict())
    assert main(["dot", a, b]) == EXIT_OK
    assert float(capsys.readouterr().out) == pytest.approx(5.0)
    assert main(["wmu", a, b]) == EXIT_OK
    assert float(capsys.readouterr().out) == pytest.approx(np.sqrt(2.5))


def test_project_and_decompose(outdir, capsys):
    mu = make_measure([[0.0, 0.0], [1.0, 0.0]])
    xi = _write(outdir / "xi.json", gamma_of(np.ones((2, 2)), mu).to_dict())
    sec = _write(outdir / "d.json", GrassmannSection.constant(mu, [[1.0, 0.0]]).to_dict())
    assert main(["project", xi, sec, "--output-dir", str(outdir)]) == EXIT_OK
    assert "residual 1" in capsys.readouterr().out
    assert (outdir / "projection.csv").exists()
    table = outdir / "cls.csv"
    assert main(["decompose", sec, "--kind", "tan", "--out", str(table)]) == EXIT_OK
    assert [r.split(",")[2] for r in table.read_text().splitlines()[1:]] == ["1", "1"]


def test_blowup_and_plot(outdir):
    curve = outdir / "curve.csv"
    assert main(["blowup", "--n", "1010", "--levels", "4", "--out", str(curve)]) == EXIT_OK
    assert curve.read_text().startswith("h,tube_mass")
    png = outdir / "curve.png"
    assert main(["plot", str(curve), "--kind", "curve", "--out", str(png)]) == EXIT_OK
    assert png.read_bytes()[:4] == b"\x89PNG"


def test_plot_section(outdir):
    sec = _write(outdir / "d.json", GrassmannSection.constant(make_measure([[0.0, 0.0], [1.0, 1.0]]),
                                                              [[0.0, 1.0]]).to_dict())
    table = outdir / "cls.csv"
    main(["decompose", sec, "--kind", "tan", "--out", str(table)])
    assert main(["plot", str(table), "--kind", "section"]) == EXIT_OK
    assert (outdir / "cls.png").exists()


def test_plot_empty_table(outdir):
    empty = outdir / "empty.csv"
    empty.write_text("h,tube_mass\n")
    assert main(["plot", str(empty), "--kind", "curve"]) == EXIT_CONFIG


def test_missing_file_exits_two(outdir):
    assert main(["dot", str(outdir / "x.json"), str(outdir / "y.json")]) == EXIT_CONFIG


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "fiberlab", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "0.1.0"
