import csv
import math

import numpy as np
import pytest

from jsgraph.cli import main
from jsgraph.io import EXAMPLES, ConfigError, fields_table, load_config, parse_config, read_vtk_points, vtk_text

from conftest import reaper_t

SMALL = """\
[experiment]
metric = r3
c = 1
output = out

[domain]
type = scherk
a = 0
b = log(2)
r = {r}
labels = ACAC

[solver]
h_target = 0.05
caps = {caps}
allow_divergent = {allow}
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def small(tmp_path, r=0.3, caps="2,4,8", allow="false"):
    return write(tmp_path, SMALL.format(r=r, caps=caps, allow=allow))


def test_geodesic_shoot_csv(tmp_path):
    out = tmp_path / "g.csv"
    code = main(["geodesic", "shoot", "--metric", "r3", "--c", "1", "--from", "0,0", "--angle", "0",
                 "--len", "2", "--out", str(out)])
    assert code == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1] - reaper_t(data[:, 0]))) < 1e-6


def test_geodesic_connect_reaper(tmp_path):
    out = tmp_path / "c.csv"
    y = -math.log(math.cos(1.0))
    code = main(["geodesic", "connect", "--metric", "r3", f"--from=-1,{y!r}", f"--to=1,{y!r}", "--out", str(out)])
    assert code == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1] - reaper_t(data[:, 0]))) < 1e-6


def test_usage_errors(capsys):
    assert main(["geodesic", "shoot", "--from", "0,0", "--angle", "0", "--len", "2"]) == 64
    assert main(["frobnicate"]) == 64
    assert main(["--threads", "0", "example"]) == 64
    assert main(["example", "nope"]) == 64
    assert main(["flength", "--metric", "r3"]) == 64
    assert main(["check", "/nonexistent.ini"]) == 64


def test_flength(capsys):
    assert main(["flength", "--metric", "r3", "--reaper=-0.3,0.3,0"]) == 0
    out = capsys.readouterr().out
    assert float(out.split(":")[1]) == pytest.approx(2 * math.tan(0.3), rel=1e-12)
    assert main(["flength", "--metric", "r3", "--c", "0", "--segment", "0,0,3,4"]) == 0
    assert float(capsys.readouterr().out.split(":")[1]) == pytest.approx(5.0)


def test_check_verdicts(tmp_path, capsys):
    assert main(["check", str(small(tmp_path))]) == 0
    assert "verdict: case_a" in capsys.readouterr().out
    assert main(["check", str(small(tmp_path, r=0.45))]) == 2
    out = capsys.readouterr().out
    assert "verdict: fails" in out and "witness: vertices [0, 1, 2, 3]" in out
    assert main(["check", str(write(tmp_path, "[domain\n", "bad.ini"))]) == 64


def test_check_invalid_domain(tmp_path, capsys):
    cfg = write(tmp_path, "[domain]\ntype = polygon\npoints = 0,0, 1,0, 1,1, 0,1\nlabels = ACAC\n")
    assert main(["check", str(cfg)]) == 2
    assert "valid: false" in capsys.readouterr().out


def test_solve_caps_contract(tmp_path, capsys):
    assert main(["solve", str(small(tmp_path)), "--caps", "2"]) == 65
    assert not (tmp_path / "out").exists()  # validated before any output


def test_solve_refuses_divergent(tmp_path):
    assert main(["solve", str(small(tmp_path, r=0.45))]) == 2
    assert main(["solve", str(small(tmp_path, r=0.45)), "--allow-divergent", "--out", str(tmp_path / "d")]) == 0
    assert "empty: false" in (tmp_path / "d" / "divergence.txt").read_text()


def test_solve_outputs_and_determinism(tmp_path):
    cfg = small(tmp_path)
    assert main(["solve", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["solve", str(cfg), "--out", str(tmp_path / "b")]) == 0
    manifest = (tmp_path / "a" / "MANIFEST").read_text()
    assert "status: complete" in manifest
    for name in ("fields.csv", "fields.vtk", "flux.csv", "divergence.txt", "checks.txt"):
        assert f"file: {name}" in manifest
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    with open(tmp_path / "a" / "flux.csv") as fh:
        rows = list(csv.DictReader(fh))
    a_ratio = {}
    for row in rows:
        if row["kind"] == "A":
            a_ratio.setdefault(row["edge"], []).append(float(row["ratio"]))
    for ratios in a_ratio.values():
        assert np.all(np.diff(ratios) > 0)


def test_flux_command(tmp_path, capsys):
    path = tmp_path / "p.csv"
    path.write_text("x,t\n-0.1,0.2\n0.1,0.4\n")
    assert main(["flux", str(small(tmp_path)), "--path", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.count("total_flux:") == 3 and "path_flux:" in out


def test_examples_parse_and_check(capsys):
    assert main(["example"]) == 0
    names = capsys.readouterr().out.split()
    assert set(names) == set(EXAMPLES)
    expected = {"scherk": "case_a", "scherk-divergent": "fails", "scherk-balanced": "case_b", "h2xr": "case_a"}
    from jsgraph.domain import check_existence

    for name in names:
        assert main(["example", name]) == 0
        cfg = parse_config(capsys.readouterr().out)
        assert check_existence(cfg.model(), cfg.build_domain()).status == expected[name]


@pytest.mark.parametrize(
    "text, match",
    [
        ("[domain]\ntype = scherk\na = 0\n", "needs b, r"),
        ("[domain]\ntype = blob\n", "unknown domain type"),
        ("[domain]\ntype = scherk\na=0\nb=1\nr=0.3\n[solver]\ncaps = 4, 2\n", "caps"),
        ("[domain]\ntype = scherk\na=0\nb=1\nr=0.3\n[solver]\nh_target = -1\n", "h_target"),
        ("[domain]\ntype = scherk\na=0\nb=1\nr=0.3\n[extra]\n", "unknown sections"),
        ("[domain]\ntype = scherk\na=0\nb=1\nr=0.3\nlabels = ACAX\n", "labels"),
        ("[experiment]\nmetric = s3\n[domain]\ntype = scherk\na=0\nb=1\nr=0.3\n", "unknown metric"),
        ("[domain]\ntype = file\npath = missing.csv\n", "not found"),
        ("[domain]\ntype = scherk\na=0\nb=1\nr=0.3\n[outputs]\nplots = true\n", "unknown output"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_file_domain(tmp_path):
    (tmp_path / "poly.csv").write_text("x,t,label,data\n0,0,C,0\n1,0,C,0\n1,1,C,1\n0,1,C,0\n")
    cfg = load_config(write(tmp_path, "[domain]\ntype = file\npath = poly.csv\n"))
    d = cfg.build_domain()
    assert len(d.edges) == 4 and d.kinds == ("C",) * 4
    assert cfg.output_dir == tmp_path / "out"


def test_vtk_and_fields_table(scherk_run_coarse):
    fields = scherk_run_coarse.fields
    text = vtk_text(scherk_run_coarse.mesh, fields)
    assert text.startswith("# vtk DataFile Version 3.0")
    assert np.array_equal(read_vtk_points(text), scherk_run_coarse.mesh.vertices)
    assert text.count("SCALARS") == len(fields)
    table = fields_table(fields).splitlines()
    assert table[0] == "vertex,x,t,boundary,u_cap_2,u_cap_4,u_cap_8"
    row = table[1].split(",")
    assert float(row[4]) == fields[0].u[0]
