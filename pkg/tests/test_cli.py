from __future__ import annotations

import math
from pathlib import Path

import pytest

from hooklab.cli import compare_resolutions, load_config, main
from hooklab.hookgen import ValidationError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SPHERE = """
[metric]
kind = sphere
radius = 1.0
resolution = 33

[flow]
rm_max_stop = 1e3
"""


def _files(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.txt"}


def test_flow_run_reports_sphere_time(tmp_path):
    cfg = tmp_path / "s3.cfg"
    cfg.write_text(SPHERE)
    assert main(["flow-run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    report = (tmp_path / "a" / "report.txt").read_text()
    t_hat = float(next(l for l in report.splitlines() if l.startswith("T_hat =")).split("=")[1])
    assert t_hat == pytest.approx(0.25, rel=1e-2)
    manifest = (tmp_path / "a" / "manifest.txt").read_text()
    for key in ("tool_version", "wall_time_s", "grid", "[config flow]", "rm_max_stop = 1000"):
        assert key in manifest


def test_outputs_are_byte_identical(tmp_path):
    cfg = tmp_path / "s3.cfg"
    cfg.write_text(SPHERE)
    for name in ("a", "b"):
        assert main(["flow-run", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    first, second = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert first.keys() == second.keys() and "channels.csv" in first
    assert first == second
    csv_bytes = first["channels.csv"]
    assert b"\r" not in csv_bytes
    assert csv_bytes.splitlines()[0].startswith(b"t,")


def test_geodesic_audit_is_seed_deterministic(tmp_path):
    cfg = tmp_path / "g.cfg"
    cfg.write_text("[hook]\nL = 20\neps1 = 0.02\neps2 = 0.05\nd0 = 0.1\nn = 1\n"
                   "[audit]\nseeds = 3\npoints = 24\nmesh_resolution = 800\nmax_iter = 300\n")
    for name in ("a", "b"):
        assert main(["geodesic-audit", "--config", str(cfg), "--out", str(tmp_path / name), "--seed", "5"]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    assert "seed = 5" in (tmp_path / "a" / "manifest.txt").read_text()


def test_eps2_out_of_range_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text((CONFIGS / "build_hook.cfg").read_text().replace("eps2 = 0.05", "eps2 = 0.25"))
    assert main(["build-hook", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "HookSpec" in err and "eps2" in err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("text,needle", [
    ("[hook]\nbogus = 1\n", "bogus"),
    ("[flow]\ncfl = 0.1\n", "[flow]"),
    ("[hook]\nL = abc\n", "L"),
    ("[hook]\nresolution = 64\n", "eps2"),
])
def test_validation_names_the_failure(tmp_path, capsys, text, needle):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    code = main(["build-hook", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    assert needle in capsys.readouterr().err


def test_ladder_needs_three_rungs(tmp_path):
    assert main(["flow-run", "--out", str(tmp_path), "--ladder", "17,33"]) == 2


def test_audit_mode_reports_no_missing_keys(tmp_path):
    cfg = tmp_path / "s3.cfg"
    cfg.write_text(SPHERE)
    assert main(["flow-run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--audit"]) == 0
    audit = (tmp_path / "a" / "audit.txt").read_text()
    assert "consumed_not_recorded = none" in audit


def test_every_shipped_config_loads():
    kinds = {"build_hook": "build-hook", "hook_curvature": "curvature-report", "s3": "flow-run",
             "cylinder": "flow-run", "neckpinch": "classify", "extinction": "extinction-compare",
             "appearance": "appearance-demo", "geodesic_audit": "geodesic-audit"}
    for stem, kind in kinds.items():
        load_config(kind, (CONFIGS / f"{stem}.cfg").read_text())


def test_compare_resolutions_orders_and_flags():
    t = compare_resolutions("q", [10, 20, 40], [1.01, 1.0025, 1.000625], exact=1.0)
    assert t.ok
    assert all(o == pytest.approx(2.0) for o in t.orders)
    slow = compare_resolutions("q", [10, 20, 40], [1.1, 1.05, 1.025], exact=1.0)
    assert any("below 1.5" in f for f in slow.flags)
    bumpy = compare_resolutions("q", [10, 20, 40], [1.01, 1.02, 1.001], exact=1.0)
    assert any("non-monotone" in f for f in bumpy.flags)
    rich = compare_resolutions("q", [10, 20, 40, 80], [1.04, 1.01, 1.0025, 1.000625])
    assert rich.orders[0] == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        compare_resolutions("q", [10, 20], [1.0, 1.0])
    assert math.isnan(compare_resolutions("q", [1, 2, 4], [1.0, 1.0, 1.0], exact=1.0).orders[0])


def test_flow_ladder_writes_convergence_table(tmp_path):
    cfg = tmp_path / "s3.cfg"
    cfg.write_text(SPHERE)
    assert main(["flow-run", "--config", str(cfg), "--out", str(tmp_path / "l"), "--ladder", "17,33,65"]) == 0
    rows = (tmp_path / "l" / "convergence.csv").read_text().splitlines()
    assert rows[0] == "quantity,resolution,value,error,order" and len(rows) == 4
    assert "flagged = false" in (tmp_path / "l" / "report.txt").read_text()


def test_batch_runs_in_isolated_directories(tmp_path):
    a = tmp_path / "one.cfg"
    b = tmp_path / "two.cfg"
    a.write_text("[run]\nkind = flow-run\n" + SPHERE)
    b.write_text("[run]\nkind = build-hook\n" + (CONFIGS / "build_hook.cfg").read_text())
    assert main(["batch", str(a), str(b), "--out", str(tmp_path / "out"), "--jobs", "2"]) == 0
    assert (tmp_path / "out" / "one" / "report.txt").exists()
    assert (tmp_path / "out" / "two" / "profile.csv").exists()
