import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horoflow import cli, surface
from horoflow.cli import ConfigError, ExperimentConfig, FieldSpec

SMALL = ExperimentConfig(
    seed=7,
    f=FieldSpec("planar_bump", (("a", 0.5), ("width", 1.0))),
    phi=FieldSpec("packet", (("center_x", 0.0), ("center_y", 0.0))),
    T=5.0,
    dt=0.1,
    n_samples=1000,
    intervals=((1.0, 2.0),),
)


def _write(tmp_path, cfg, name="run.ini"):
    path = tmp_path / name
    cfg.save(path)
    return path


@given(
    st.integers(0, 2**31),
    st.sampled_from(["planar", "bolza"]),
    st.sampled_from(["negative", "positive"]),
    st.floats(0.01, 10.0),
    st.floats(1e-12, 1e-6),
    st.floats(1e-4, 1e-1),
    st.integers(1000, 10**6),
)
def test_config_round_trip(seed, backend, orientation, T, tol, step, n):
    if backend == "planar":
        f, phi = FieldSpec("planar_bump", (("a", 0.3), ("width", 1.5))), FieldSpec("packet", (("wavenumber", 2.0),))
    else:
        f, phi = FieldSpec("poincare", (("epsilon", 0.1),)), FieldSpec("poincare", ())
    cfg = ExperimentConfig(seed=seed, backend=backend, orientation=orientation, f=f, phi=phi, T=T,
                           dt=T / 100, flow_tol=tol, correlation_tol=tol, fd_step=step, n_samples=n)
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back == cfg
    assert back.config_hash == cfg.config_hash


def test_shipped_configs_load():
    from pathlib import Path

    for path in sorted(Path(__file__).resolve().parents[1].glob("configs/*.ini")):
        ExperimentConfig.load(path)


def test_hash_ignores_threads_and_output():
    assert replace(SMALL, threads=4, output="elsewhere").config_hash == SMALL.config_hash
    assert replace(SMALL, seed=8).config_hash != SMALL.config_hash


def test_seed_is_mandatory():
    text = SMALL.to_text().replace("seed = 7\n", "")
    with pytest.raises(ConfigError, match="seed"):
        ExperimentConfig.from_text(text)


def test_version_is_checked():
    with pytest.raises(ConfigError, match="version"):
        ExperimentConfig.from_text(SMALL.to_text().replace("version = 1", "version = 2"))


@pytest.mark.parametrize(
    "change",
    [{"flow_tol": 1e-3}, {"correlation_tol": 1e-14}, {"fd_step": 1.0}, {"n_samples": 10}, {"backend": "torus"},
     {"phi": FieldSpec("poincare", ())}, {"intervals": ((2.0, 1.0),)}],
)
def test_validation_rejects(change):
    with pytest.raises(ConfigError):
        replace(SMALL, **change).validate()


def test_out_of_range_tolerance_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(SMALL.to_text().replace("flow = 1e-10", "flow = 0.001"))
    assert cli.main(["spectrum", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "flow_tol" in capsys.readouterr().err


def test_broken_generators_fail_verify(tmp_path, capsys):
    group = surface.build_bolza()
    gens = group.generators.copy()
    gens[0] = gens[0] @ np.array([[1.0, 1e-3], [0.0, 1.0]])
    broken = tmp_path / "broken.txt"
    surface.FuchsianGroup(gens, group.relation_word).save(broken)
    cfg = replace(SMALL, backend="bolza", f=FieldSpec("poincare", ()), phi=FieldSpec("poincare", ()),
                  generators=str(broken))
    code = cli.main(["verify", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")])
    assert code != 0
    assert "build_bolza relation" in capsys.readouterr().err
    man = json.loads((tmp_path / "o" / "verify_manifest.json").read_text())
    assert man["exit_code"] == 1


def test_spectrum_is_reproducible(tmp_path):
    path = _write(tmp_path, SMALL)
    outs = []
    for k, threads in enumerate((1, 3)):
        out = tmp_path / f"o{k}"
        assert cli.main(["spectrum", "--config", str(path), "--out", str(out), "--threads", str(threads)]) == 0
        outs.append(out)
    for name in ("correlation.csv", "density.csv", "spectrum.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    a = json.loads((outs[0] / "spectrum_manifest.json").read_text())
    assert a["config_hash"] == SMALL.config_hash and a["seed"] == 7
    assert set(a["files"]) >= {"correlation.csv", "density.csv", "spectrum.json", "exact_density.csv"}


def test_seed_override_changes_output(tmp_path):
    path = _write(tmp_path, SMALL)
    cli.main(["spectrum", "--config", str(path), "--out", str(tmp_path / "a")])
    cli.main(["spectrum", "--config", str(path), "--out", str(tmp_path / "b"), "--seed", "8"])
    assert (tmp_path / "a" / "correlation.csv").read_bytes() != (tmp_path / "b" / "correlation.csv").read_bytes()


def test_mourre_on_bolza_exits_2(tmp_path, capsys):
    cfg = replace(SMALL, backend="bolza", f=FieldSpec("poincare", ()), phi=FieldSpec("poincare", ()))
    assert cli.main(["mourre", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 2
    assert "planar" in capsys.readouterr().err


def test_oversized_bump_fails_assumption(tmp_path, capsys):
    cfg = replace(SMALL, f=FieldSpec("planar_bump", (("a", 3.0), ("width", 1.0))))
    out = tmp_path / "o"
    assert cli.main(["assumption", "--config", str(_write(tmp_path, cfg)), "--out", str(out)]) == 1
    assert "verdict: fail" in capsys.readouterr().out
    assert (out / "assumption.txt").exists()


def test_mourre_and_report(tmp_path):
    path = _write(tmp_path, SMALL)
    out = tmp_path / "o"
    assert cli.main(["assumption", "--config", str(path), "--out", str(out)]) == 0
    assert cli.main(["mourre", "--config", str(path), "--out", str(out)]) == 0
    data = json.loads((out / "mourre.json").read_text())
    assert data["intervals"][0]["passed"]
    assert cli.main(["report", "--config", str(path), "--out", str(out)]) == 0
    report = (out / "report.md").read_text()
    assert "## assumption (exit 0)" in report and "## mourre (exit 0)" in report
