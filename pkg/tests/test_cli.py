"""CLI contract: exit codes, artifacts, manifests, determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from relloc import observability
from relloc.cli import EXIT_ASSERTION, EXIT_OK, EXIT_USAGE, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _read_manifest(out_dir):
    with open(Path(out_dir) / "manifest.json") as fh:
        return json.load(fh)


def _csv_body(path):
    return [l for l in Path(path).read_text().splitlines()
            if not l.startswith("#")]


# -- converge --------------------------------------------------------------

def test_converge_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    rc = main(["converge", "--trials", "2", "--seed", "3",
               "--out", str(out)])
    assert rc == EXIT_OK
    manifest = _read_manifest(out)
    assert sorted(manifest["artifacts"]) == ["summary.txt", "trials.csv"]
    for name in manifest["artifacts"]:
        assert (out / name).exists()
    assert manifest["seed"] == 3
    body = _csv_body(out / "trials.csv")
    assert body[0].startswith("trial,seed,converged")
    assert len(body) == 3


def test_converge_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["converge", "--trials", "1", "--seed", "7",
                     "--out", str(out)]) == EXIT_OK
        outs.append((out / "trials.csv").read_text())
    assert outs[0] == outs[1]


def test_converge_assert_failure_exit_code(tmp_path):
    rc = main(["converge", "--trials", "1", "--seed", "0",
               "--out", str(tmp_path / "x"), "--assert",
               "--mean-limit", "0.0001"])
    assert rc == EXIT_ASSERTION


def test_converge_with_config_file(tmp_path):
    rc = main(["converge", "--config", str(CONFIGS / "converge.toml"),
               "--trials", "1", "--out", str(tmp_path / "c")])
    assert rc == EXIT_OK


def test_malformed_config_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[scenario\nn_robots = 2\n")
    rc = main(["converge", "--config", str(bad), "--trials", "1",
               "--out", str(tmp_path / "y")])
    assert rc == EXIT_USAGE


def test_unknown_config_key_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[scenario]\nrobot_count = 2\n")
    rc = main(["converge", "--config", str(bad), "--trials", "1",
               "--out", str(tmp_path / "z")])
    assert rc == EXIT_USAGE


def test_missing_config_exit_code(tmp_path):
    rc = main(["converge", "--config", str(tmp_path / "nope.toml"),
               "--out", str(tmp_path / "w")])
    assert rc == EXIT_USAGE


# -- observe ---------------------------------------------------------------

def _observe_rows(tmp_path, grid, name):
    out = tmp_path / name
    assert main(["observe", "--grid", grid, "--out", str(out)]) == EXIT_OK
    body = _csv_body(out / "observability.csv")
    header = body[0].split(",")
    return [dict(zip(header, line.split(","))) for line in body[1:]]


def test_observe_single_point_matches_library(tmp_path):
    rows = _observe_rows(tmp_path, "x=2,y=1,psi=0.4,vjx=0.7,vjy=0.3,rj=0.4",
                         "pt")
    assert len(rows) == 1
    rep = observability.analyze([2.0, 1.0, 0.4],
                                [0.0, 0.0, 0.0, 0.7, 0.3, 0.4])
    row = rows[0]
    assert float(row["det"]) == pytest.approx(rep.det_matrix, rel=1e-5)
    assert int(row["rank"]) == rep.rank
    assert row["flags"] == ";".join(sorted(rep.regime_flags))


def test_observe_formation_lock_grid(tmp_path):
    rows = _observe_rows(tmp_path, "formation-lock:50:1", "lock")
    assert len(rows) == 50
    for row in rows:
        assert "FormationLock" in row["flags"]
        assert abs(float(row["det"])) < 1e-9


def test_observe_random_grid_mostly_observable(tmp_path):
    rows = _observe_rows(tmp_path, "random:400:2", "rand")
    frac = np.mean(["Observable" in r["flags"] for r in rows])
    assert frac > 0.95


def test_observe_invalid_grid_exit_code(tmp_path):
    rc = main(["observe", "--grid", "bogus=1:2", "--out", str(tmp_path / "g")])
    assert rc == EXIT_USAGE


def test_observe_manifest(tmp_path):
    out = tmp_path / "m"
    assert main(["observe", "--grid", "x=1,vjx=0.5", "--out", str(out)]) == EXIT_OK
    manifest = _read_manifest(out)
    assert manifest["artifacts"] == ["observability.csv"]


# -- formation / leader ----------------------------------------------------

def test_formation_rejects_single_robot(tmp_path):
    cfg = tmp_path / "one.toml"
    cfg.write_text("[scenario]\nn_robots = 1\n")
    rc = main(["formation", "--config", str(cfg), "--out", str(tmp_path / "f")])
    assert rc == EXIT_USAGE


def test_formation_two_robot_run(tmp_path):
    cfg = tmp_path / "pair.toml"
    cfg.write_text("[scenario]\nn_robots = 2\nseed = 0\n"
                   "[formation]\noffsets = [[1.0, 0.0]]\n")
    out = tmp_path / "f2"
    rc = main(["formation", "--config", str(cfg), "--out", str(out)])
    assert rc == EXIT_OK
    manifest = _read_manifest(out)
    assert sorted(manifest["artifacts"]) == ["summary.txt", "trace.csv"]
    body = _csv_body(out / "trace.csv")
    assert body[0] == "t,x0,y0,x1,y1"
    summary = (out / "summary.txt").read_text()
    assert "max_axis_error_m" in summary


def test_leader_run(tmp_path):
    out = tmp_path / "l"
    rc = main(["leader", "--config", str(CONFIGS / "leader.toml"),
               "--out", str(out)])
    assert rc == EXIT_OK
    summary = (out / "summary.txt").read_text()
    assert "gate_pass = True" in summary
    body = _csv_body(out / "trace.csv")
    assert body[0] == "t,x_follower,y_follower,x_leader,y_leader"
