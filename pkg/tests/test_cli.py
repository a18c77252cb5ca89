import json
import os

import numpy as np
import pytest

from wavefront import cli


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


def test_simulate_writes_records_and_manifest(tmp_path, capsys):
    code = run(tmp_path, "simulate", "--steps", "10", "--burn-in", "0", "--seed", "7")
    assert code == 0
    w = np.genfromtxt(tmp_path / "waves.csv", delimiter=",", names=True)
    assert len(w) == 10 and list(w["t"]) == list(range(1, 11))
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["spec"]["seed"] == 7 and m["command"] == "simulate"
    assert "simulated 10 steps" in capsys.readouterr().out
    snap = np.genfromtxt(tmp_path / "snapshot.csv", delimiter=",", names=True)
    assert snap.dtype.names == ("rank", "position", "spacing", "last_move_time")
    assert snap["position"][0] == 0.0
    assert np.allclose(np.cumsum(snap["spacing"]), snap["position"], rtol=0, atol=1e-9)


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(d, "simulate", "--steps", "500", "--burn-in", "0", "--seed", "3") == 0
    for name in ("waves.csv", "snapshot.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_invalid_spec_lists_every_error(tmp_path, capsys):
    code = run(tmp_path, "simulate", "--steps", "-1", "--replicates", "0", "--dist", "uniform:2,1")
    assert code == 2
    err = capsys.readouterr().err
    assert "steps must be positive" in err and "replicates must be positive" in err and "dist:" in err


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# test config\nsteps = 20\nburn-in = 0\nseed = 11\nn = 64, 128\n")
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", str(cfg), "--seed", "12", "--out", str(out)]) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["spec"]["seed"] == 12 and m["spec"]["steps"] == 20 and m["spec"]["n_list"] == [64, 128]
    cfg.write_text("bogus = 1\n")
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2


def test_missing_prerequisite_names_producer(tmp_path, capsys):
    assert run(tmp_path, "tail", "--steps", "10", "--burn-in", "0") == 2
    assert "wavefront simulate" in capsys.readouterr().err


def _write_waves(path, W):
    with open(path, "w") as fh:
        fh.write("t,W,L,censored\n")
        for t, w in enumerate(W, 1):
            fh.write("%d,%d,%r,0\n" % (t, w, float(w)))


def _write_rho1(path):
    path.write_text(json.dumps({"value": 0.56, "se": 0.003}))


def test_tail_on_synthetic_log(tmp_path, capsys):
    # W uniform on 1..2048: P(W > j) = 1 - j/2048, far from a power law
    W = np.arange(20_000) % 2048 + 1
    _write_waves(tmp_path / "waves.csv", W)
    _write_rho1(tmp_path / "rho1.json")
    code = run(tmp_path, "tail", "--steps", "20000", "--burn-in", "0", "--j-grid", "16,32,64,128,256,1024")
    out = capsys.readouterr().out
    assert code == 1 and "FAIL C1" in out
    t = np.genfromtxt(tmp_path / "tail.csv", delimiter=",", names=True)
    assert t["rho_hat"][0] == pytest.approx(np.mean(W > 16))
    verdicts = json.loads((tmp_path / "verdicts.json").read_text())
    assert [v["id"] for v in verdicts] == ["C1", "C2"]


def test_tail_with_no_long_waves_is_an_error(tmp_path, capsys):
    _write_waves(tmp_path / "waves.csv", np.ones(1000, dtype=int))
    _write_rho1(tmp_path / "rho1.json")
    with pytest.warns(UserWarning, match="zero counts"):
        code = run(tmp_path, "tail", "--steps", "1000", "--burn-in", "0")
    assert code == 2
    assert "nonzero counts" in capsys.readouterr().err
    t = np.genfromtxt(tmp_path / "tail.csv", delimiter=",", names=True)
    assert np.all(t["rho_hat"] == 0)


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["simulate", "--steps", "5", "--burn-in", "0", "--out", str(blocker / "sub")]) == 2
