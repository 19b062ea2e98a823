"""Configuration, run directories, and the command-line pipeline."""

import json
import shutil

import numpy as np
import pytest

from curvgap import ParameterError
from curvgap.cli import main
from curvgap.config import RunConfig
from curvgap.rundir import FieldChecksumError, RunDirectory, sanitize_json

FLAT_CFG = {
    "geometry": {"n": 1, "N": 32, "omega0": {"family": "flat"}},
    "schedule": {"t_start": 1.0, "t_end": 0.2, "steps": 8},
    "hypotheses": {"eps": 0.05, "delta": 0.02},
    "seed": 7,
}

PERT_CFG = {
    "geometry": {
        "n": 1, "N": 32,
        "omega0": {"family": "kahler_potential", "potential": {
            "terms": [{"c": 0.02, "modes": [1, 0], "kind": "cos"},
                      {"c": 0.015, "modes": [0, 1], "kind": "sin"}]}},
        "region": {"center": [0.5, 0.75], "radii": 0.12},
    },
    "functional": {"kind": "rbc", "restarts": 16},
    "schedule": {"t_start": 3.0, "t_end": 2.0, "steps": 5},
    "hypotheses": {"eps": 0.05, "delta": 0.5},
    "seed": 11,
}


def _write_cfg(path, data):
    path.write_text(json.dumps(data, indent=1))
    return path


# ------------------------------------------------------------------- config

def test_config_roundtrip_and_accessors(tmp_path):
    cfg = RunConfig.from_dict(FLAT_CFG)
    assert (cfg.n, cfg.N, cfg.mode, cfg.seed) == (1, 32, "thm1", 7)
    assert cfg.grid().shape == (32, 32)
    assert cfg.build_omega0().det.shape == (32, 32)
    assert cfg.schedule().steps == 8
    again = RunConfig.from_dict(json.loads(cfg.to_json()))
    assert again.to_json() == cfg.to_json()


def test_config_rejects_unknown_and_missing(tmp_path):
    bad = {"geometry": {"n": 1, "omega0": {"family": "flat"}}}
    with pytest.raises(ParameterError) as exc:
        RunConfig.from_dict(bad)
    assert "N" in str(exc.value)

    extra = json.loads(json.dumps(FLAT_CFG))
    extra["geometry"]["M"] = 3
    with pytest.raises(ParameterError) as exc:
        RunConfig.from_dict(extra)
    assert "$.geometry" in str(exc.value)

    p = tmp_path / "broken.json"
    p.write_text('{"geometry": [}')
    with pytest.raises(ParameterError) as exc:
        RunConfig.from_file(p)
    assert "line" in str(exc.value)


def test_config_domain_errors():
    sched_bad = json.loads(json.dumps(FLAT_CFG))
    sched_bad["schedule"] = {"t_start": 0.2, "t_end": 1.0, "steps": 8}
    with pytest.raises(ParameterError):
        RunConfig.from_dict(sched_bad)

    thm2_bad = json.loads(json.dumps(FLAT_CFG))
    thm2_bad["mode"] = "thm2"
    thm2_bad["functional"] = {"kind": "ric_perp", "alpha": 1.0, "beta": 0.0}
    with pytest.raises(ParameterError):
        RunConfig.from_dict(thm2_bad)


# ------------------------------------------------------------------- rundir

def test_rundir_field_roundtrip(tmp_path):
    rd = RunDirectory(tmp_path / "run", create=True)
    real = np.linspace(0, 1, 64).reshape(8, 8)
    cplx = real + 1j * real[::-1]
    rd.save_field("real_f", real)
    rd.save_field("cplx_f", cplx)
    assert np.array_equal(rd.load_field("real_f"), real)
    assert np.array_equal(rd.load_field("cplx_f"), cplx)
    assert set(rd.list_fields()) >= {"real_f", "cplx_f"}

    blob = rd.root / "fields" / "real_f.bin"
    raw = bytearray(blob.read_bytes())
    raw[3] ^= 0xFF
    blob.write_bytes(bytes(raw))
    with pytest.raises(FieldChecksumError) as exc:
        rd.load_field("real_f")
    assert "corrupted" in str(exc.value)


def test_rundir_summary_and_report(tmp_path):
    from types import SimpleNamespace

    rd = RunDirectory(tmp_path / "run", create=True)

    def row(t, iters):
        return SimpleNamespace(t=t, diagnostics={
            "sup_u": 0.0, "min_eig": 1.0, "sup_tr_eta": 1.0 / t,
            "int_exp_u": t, "int_exp_cu": t, "newton_iters": iters,
            "residual": 1e-12})

    rd.append_summary_row(0, row(1.0, 2))
    rd.append_summary_row(1, row(0.9, 3))
    rows = rd.read_summary()
    assert len(rows) == 2 and float(rows[1]["t"]) == 0.9
    assert int(rows[1]["newton_iters"]) == 3

    rd.write_report({"b": 1, "a": [1.5, None]})
    text = (rd.root / "report.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert rd.read_report() == {"b": 1, "a": [1.5, None]}

    clean = sanitize_json({"x": float("nan"), "y": [float("inf"), 2.0]})
    assert clean["x"] == {"non_finite": "nan"}
    assert clean["y"][0] == {"non_finite": "inf"}

    rd.write_meta(extra={"note": "zz"})
    meta = rd.read_meta()
    assert meta["extra"]["note"] == "zz"
    assert "versions" in meta


# ---------------------------------------------------------------- pipeline

@pytest.fixture(scope="module")
def pert_run(tmp_path_factory):
    """A solved and audited curved run, reused by the later tests."""
    base = tmp_path_factory.mktemp("cli")
    cfg = _write_cfg(base / "pert.json", PERT_CFG)
    out = base / "run"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["audit", "--run", str(out)]) == 0
    return out


def test_curvature_command_flat(tmp_path):
    cfg = _write_cfg(tmp_path / "flat.json", FLAT_CFG)
    out = tmp_path / "curv"
    assert main(["curvature", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["command"] == "curvature"
    assert rep["mu_eta"] == pytest.approx(0.0, abs=1e-12)
    rd = RunDirectory(out, create=False)
    assert {"curvature_tensor", "ricci", "extremal_max",
            "omega0_det"} <= set(rd.list_fields())


def test_certify_command_flat(tmp_path):
    cfg = _write_cfg(tmp_path / "flat.json", FLAT_CFG)
    out = tmp_path / "cert"
    assert main(["certify", "--config", str(cfg), "--out", str(out),
                 "--find-delta", "--sweep", "0.1,0.01"]) == 0
    rep = json.loads((out / "report.json").read_text())
    # a flat geometry has no negative well anywhere, so no delta certifies
    assert rep["find_delta"] == 0.0
    assert not rep["all_certified"]
    assert [s["eps"] for s in rep["sweep"]] == [0.1, 0.01]


def test_solve_command_closed_form(tmp_path):
    cfg = _write_cfg(tmp_path / "flat.json", FLAT_CFG)
    out = tmp_path / "solve"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    rd = RunDirectory(out, create=False)
    rows = rd.read_summary()
    assert len(rows) == FLAT_CFG["schedule"]["steps"] + 1
    for i, row in enumerate(rows):
        t = float(row["t"])
        phi = rd.load_field(f"phi_{i:04d}")
        assert np.abs(phi - np.log(t)).max() <= 1e-8
        assert abs(float(row["sup_u"]) - np.log(t)) <= 1e-8
    rep = json.loads((out / "report.json").read_text())
    assert rep["solve"]["termination"] == "reached_t_end"


def test_audit_command_curved(pert_run):
    rep = json.loads((pert_run / "report.json").read_text())
    assert rep["command"] == "audit"
    assert rep["mode"] == "thm1"
    checks = rep["checks"]
    assert len(checks) > 50
    assert all(c["passed"] for c in checks)
    assert rep["gap"]["consistent"]
    assert not rep["gap"]["all_certified"]
    assert rep["gap"]["certified"]["quasi_negative"] is False
    names = {c["name"].split("[")[0] for c in checks}
    assert {"schwarz", "trace_bound", "sup_bound", "chain.divergence",
            "chain.amgm", "chain.final", "chain.composite",
            "gap.neg_ricci_volume"} <= names
    svgs = list((pert_run / "plots").glob("*.svg"))
    assert svgs


def test_audit_rerun_is_byte_identical(pert_run):
    before = (pert_run / "report.json").read_bytes()
    assert main(["audit", "--run", str(pert_run)]) == 0
    assert (pert_run / "report.json").read_bytes() == before


def test_report_command(pert_run, capsys):
    assert main(["report", "--run", str(pert_run)]) == 0
    human = capsys.readouterr().out
    assert "verdict" in human or "gap" in human
    assert main(["report", "--run", str(pert_run), "--json"]) == 0
    parsed = json.loads(capsys.readouterr().out)
    assert parsed["command"] == "audit"


def test_solve_determinism(tmp_path):
    cfg = _write_cfg(tmp_path / "pert.json", PERT_CFG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", str(cfg), "--out", str(out_a)]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(out_b)]) == 0
    assert (out_a / "summary.csv").read_bytes() == \
        (out_b / "summary.csv").read_bytes()
    assert (out_a / "report.json").read_bytes() == \
        (out_b / "report.json").read_bytes()


def test_bad_config_exits_2(tmp_path, capsys):
    broken = json.loads(json.dumps(FLAT_CFG))
    del broken["geometry"]["N"]
    cfg = _write_cfg(tmp_path / "bad.json", broken)
    code = main(["solve", "--config", str(cfg), "--out",
                 str(tmp_path / "x")])
    assert code == 2
    err = capsys.readouterr().err
    assert "error[E02]" in err and "N" in err


def test_below_threshold_exits_2(tmp_path, capsys):
    low = json.loads(json.dumps(PERT_CFG))
    low["schedule"] = {"t_start": 1.0, "t_end": 0.5, "steps": 3}
    cfg = _write_cfg(tmp_path / "low.json", low)
    code = main(["solve", "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert code == 2
    assert "error[E02]" in capsys.readouterr().err


def test_corrupted_dump_exits_4(pert_run, tmp_path, capsys):
    clone = tmp_path / "clone"
    shutil.copytree(pert_run, clone)
    blob = clone / "fields" / "phi_0000.bin"
    raw = bytearray(blob.read_bytes())
    raw[0] ^= 0xFF
    blob.write_bytes(bytes(raw))
    code = main(["audit", "--run", str(clone)])
    assert code == 4
    err = capsys.readouterr().err
    assert "error[E04]" in err and "phi_0000" in err


def test_seed_override_with_stored_run_rejected(pert_run, capsys):
    code = main(["audit", "--run", str(pert_run), "--seed", "5"])
    assert code == 2
    assert "seed" in capsys.readouterr().err
