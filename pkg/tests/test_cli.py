import csv

import numpy as np
import pytest

from rasterpty import cli
from rasterpty import io as pio
from rasterpty import scan

SMALL = ["--set", "geometry.n=12", "--set", "geometry.m=6", "--set", "pattern.tau=3"]


def read_kv(path):
    return dict(line.split("=", 1) for line in path.read_text().splitlines())


def test_parse_config():
    cfg = cli.parse_config("# comment\ngeometry.n = 32  # trailing\n\nrecon.inner_iters=5\n")
    assert cfg == {"geometry.n": "32", "recon.inner_iters": "5"}
    with pytest.raises(cli.UsageError):
        cli.parse_config("no_equals_sign\n")
    with pytest.raises(cli.UsageError):
        cli.parse_config("nosection=3\n")


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("geometry.n=32\ngeometry.m=8\n")
    cfg = cli.load_config(p, ["geometry.m=4"])
    assert cfg["geometry.n"] == "32" and cfg["geometry.m"] == "4" and cfg["pattern.tau"] == "8"
    rc = cli.build_recon_config({"recon.inner_iters": "7", "recon.enforce_boundary": "no", "recon.re_window": "none"})
    assert rc.inner_iters == 7 and rc.enforce_boundary is False and rc.re_window is None
    with pytest.raises(cli.UsageError):
        cli.build_recon_config({"recon.inner_iters": "many"})


def test_simulate_default_geometry(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run(["simulate", "-o", str(a)]) == 0
    assert "patterns=64 size=32" in capsys.readouterr().out
    data = pio.read_ptyd(a / "data.ptyd", 64, 8)
    assert len(data) == 64 and data.magnitudes.shape == (64, 32, 32)
    assert pio.read_ptyc(a / "object.ptyc").shape == (64, 64)
    assert scan.load(a / "pattern.txt") == scan.raster(64, 8)
    assert cli.run(["simulate", "-o", str(b)]) == 0
    for name in ("object.ptyc", "probe.ptyc", "data.ptyd", "pattern.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_rejects_step_not_dividing_n(tmp_path):
    assert cli.run(["simulate", "-o", str(tmp_path), "--set", "pattern.tau=7"]) != 0


def test_audit_raster_and_perturbed(tmp_path, capsys):
    assert cli.run(["audit", "--set", "geometry.n=16", "--set", "pattern.tau=4", "--m", "8"]) == 0
    assert "coprime_ok=false" in capsys.readouterr().out.splitlines()
    p = tmp_path / "pat.txt"
    scan.save(scan.perturbed_separable(8, 2, [0, 0, -1, 0], [0, 0, -1, 0]), p)
    assert cli.run(["audit", "--pattern", str(p), "--m", "5"]) == 0
    assert "coprime_ok=true" in capsys.readouterr().out.splitlines()


def test_missing_files_exit_2(tmp_path, capsys):
    assert cli.run(["audit", "--pattern", str(tmp_path / "nope.txt"), "--m", "4"]) == 2
    assert cli.run(["simulate", "--config", str(tmp_path / "nope.cfg"), "-o", str(tmp_path)]) == 2
    assert cli.run(["reconstruct", "-o", str(tmp_path), "--set", f"input.data={tmp_path / 'x.ptyd'}"]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_options_exit_2(tmp_path):
    assert cli.run(["simulate", "-o", str(tmp_path), "--set", "pattern.kind=spiral"]) == 2
    assert cli.run(["simulate", "-o", str(tmp_path), "--set", "geometry.boundary=foggy"]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.run(["teleport"])
    assert exc.value.code == 2


@pytest.mark.parametrize("tau,case", [(3, "undershift"), (4, "overshift")])
def test_ambiguity_pathology(tmp_path, tau, case):
    args = ["ambiguity", "--class", "pathology", "-o", str(tmp_path), "--set", "geometry.n=12",
            "--set", "geometry.m=6", "--set", f"pattern.tau={tau}", "--set", "ambiguity.r1=" + str(2 * np.pi / (12 // tau))]
    assert cli.run(args) == 0
    rep = read_kv(tmp_path / "ambiguity_report.txt")
    assert rep["case"] == case and float(rep["max_dev"]) < 1e-10
    assert pio.read_ptyc(tmp_path / "g.ptyc").shape == (12, 12)


def test_ambiguity_scaling_identity(tmp_path):
    assert cli.run(["ambiguity", "--class", "scaling", "-o", str(tmp_path), *SMALL, "--set", "ambiguity.c=1"]) == 0
    assert cli.run(["simulate", "-o", str(tmp_path / "sim"), *SMALL]) == 0
    np.testing.assert_array_equal(pio.read_ptyc(tmp_path / "g.ptyc"), pio.read_ptyc(tmp_path / "sim/object.ptyc"))
    np.testing.assert_array_equal(pio.read_ptyc(tmp_path / "nu.ptyc"), pio.read_ptyc(tmp_path / "sim/probe.ptyc"))
    assert read_kv(tmp_path / "ambiguity_report.txt")["case"] == "n/a"


def test_ambiguity_bad_lattice_slope(tmp_path):
    args = ["ambiguity", "--class", "progression", "-o", str(tmp_path), *SMALL, "--set", "ambiguity.r1=0.1"]
    assert cli.run(args) == 2


def test_corrupt_ptyd_exit_2(tmp_path):
    bad = tmp_path / "bad.ptyd"
    bad.write_bytes(b"PTYD x y z\n\0\0")
    assert cli.run(["reconstruct", "-o", str(tmp_path), *SMALL, "--set", f"input.data={bad}"]) == 2


def recon_args(out, epochs=3):
    return ["reconstruct", "-o", str(out), *SMALL, "--set", "pattern.kind=perturbed", "--set", "pattern.bound=1",
            "--set", f"recon.max_epochs={epochs}", "--set", "recon.inner_iters=5"]


def test_reconstruct_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run(recon_args(a)) == 0
    assert cli.run(recon_args(b)) == 0
    with open(a / "convergence.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "data_residual", "RE_object", "RE_probe", "wall_ms"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "3"]
    with open(b / "convergence.csv") as fh:
        rows_b = list(csv.reader(fh))
    assert [r[:4] for r in rows] == [r[:4] for r in rows_b]
    summary = read_kv(a / "summary.txt")
    assert summary["stop_reason"] == "max_epochs" and summary["epochs"] == "3"
    assert "fitted_slope" in summary and "refined_slope" not in summary
    assert (a / "object_est.ptyc").read_bytes() == (b / "object_est.ptyc").read_bytes()


def test_reconstruct_from_simulated_files(tmp_path):
    sim = tmp_path / "sim"
    assert cli.run(["simulate", "-o", str(sim), *SMALL, "--set", "geometry.boundary=bright"]) == 0
    args = ["reconstruct", "-o", str(tmp_path / "rec"), *SMALL, "--set", "geometry.boundary=bright",
            "--set", f"input.data={sim / 'data.ptyd'}", "--set", f"input.object={sim / 'object.ptyc'}",
            "--set", f"input.probe={sim / 'probe.ptyc'}", "--set", "recon.max_epochs=2", "--set", "recon.inner_iters=3"]
    assert cli.run(args) == 0
    assert "refined_slope" in read_kv(tmp_path / "rec/summary.txt")


def test_reconstruct_without_probe_truth_needs_init_file(tmp_path):
    sim = tmp_path / "sim"
    assert cli.run(["simulate", "-o", str(sim), *SMALL]) == 0
    base = ["reconstruct", "-o", str(tmp_path / "rec"), *SMALL, "--set", f"input.data={sim / 'data.ptyd'}",
            "--set", "recon.max_epochs=1", "--set", "recon.inner_iters=2"]
    assert cli.run(base) == 2
    ok = base + ["--set", "recon.init_mode=file", "--set", f"recon.init_file={sim / 'probe.ptyc'}"]
    assert cli.run(ok) == 0
    assert read_kv(tmp_path / "rec/summary.txt")["RE_object"] == "nan"


def test_require_tol_exit_1(tmp_path):
    assert cli.run(recon_args(tmp_path, epochs=1) + ["--set", "recon.require_tol=true"]) == 1
