"""Experiment configs, field tables, legacy VTK export and run manifests."""
from __future__ import annotations

import configparser
import csv
import io as _io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import AdmissibleDomain, polygon_domain, scherk_quadrilateral
from .metric import BUILTIN_MODELS, MetricModel, model_by_name
from .mesh import TriMesh
from .solver import CapSchedule, ContractError, SolutionField


class ConfigError(ValueError):
    """Malformed or inconsistent experiment config."""


OUTPUT_KEYS = ("fields", "vtk", "flux", "divergence", "checks")


@dataclass
class ExperimentConfig:
    metric: str = "r3"
    c: float = 1.0
    domain: dict = field(default_factory=dict)
    h_target: float = 0.05
    verify_h: tuple[float, ...] = ()
    caps: tuple[float, ...] = (2.0, 4.0, 8.0, 16.0)
    tol: float = 1e-10
    threshold: float = 0.5
    kf_tol: float = 0.05
    allow_divergent: bool = False
    outputs: dict = field(default_factory=lambda: {k: True for k in OUTPUT_KEYS})
    output_dir: Path = Path("out")
    source: Path | None = None

    def model(self) -> MetricModel:
        return model_by_name(self.metric, self.c)

    def schedule(self) -> CapSchedule:
        return CapSchedule(self.caps)

    def build_domain(self) -> AdmissibleDomain:
        return domain_from_spec(self.model(), self.domain, self.source)


def _floats(text: str, what: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from exc
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{what}: values must be finite")
    return vals


def _number(text: str, what: str) -> float:
    vals = _floats(text, what)
    if len(vals) != 1:
        raise ConfigError(f"{what}: expected one number, got {text!r}")
    return vals[0]


def _expr(text: str, what: str) -> float:
    """Number or one of the forms ``log(v)``, ``asin(v)``, ``pi*v`` (config convenience)."""
    t = text.strip().replace(" ", "")
    for name, fn in (("log(", math.log), ("asin(", math.asin), ("arcsin(", math.asin)):
        if t.startswith(name) and t.endswith(")"):
            return fn(_number(t[len(name):-1], what))
    if t.startswith("pi*"):
        return math.pi * _number(t[3:], what)
    return _number(t, what)


def _bool(text: str, what: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{what}: expected true/false, got {text!r}")


def parse_config(text: str, source: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    known = {"experiment", "domain", "solver", "outputs"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(sorted(extra))}")
    if not cp.has_section("domain"):
        raise ConfigError("missing [domain] section")
    cfg = ExperimentConfig(source=source)
    ex = cp["experiment"] if cp.has_section("experiment") else {}
    cfg.metric = ex.get("metric", cfg.metric).strip()
    if cfg.metric not in BUILTIN_MODELS:
        raise ConfigError(f"unknown metric {cfg.metric!r}; choose from {', '.join(BUILTIN_MODELS)}")
    cfg.c = _number(ex.get("c", "1"), "experiment.c")
    out = ex.get("output", "out")
    cfg.output_dir = Path(out) if source is None or Path(out).is_absolute() else source.parent / out
    cfg.domain = dict(cp["domain"])
    if "type" not in cfg.domain:
        raise ConfigError("domain.type is required (scherk, polygon or file)")
    sv = cp["solver"] if cp.has_section("solver") else {}
    cfg.h_target = _number(sv.get("h_target", str(cfg.h_target)), "solver.h_target")
    if not cfg.h_target > 0:
        raise ConfigError("solver.h_target must be positive")
    cfg.verify_h = _floats(sv.get("verify_h", ""), "solver.verify_h")
    if any(h <= 0 for h in cfg.verify_h):
        raise ConfigError("solver.verify_h must be positive")
    cfg.caps = _floats(sv.get("caps", "2,4,8,16"), "solver.caps")
    try:
        CapSchedule(cfg.caps)
    except ContractError as exc:
        raise ConfigError(f"solver.caps: {exc}") from exc
    cfg.tol = _number(sv.get("tol", "1e-10"), "solver.tol")
    cfg.threshold = _number(sv.get("threshold", "0.5"), "solver.threshold")
    cfg.kf_tol = _number(sv.get("kf_tol", "0.05"), "solver.kf_tol")
    cfg.allow_divergent = _bool(sv.get("allow_divergent", "false"), "solver.allow_divergent")
    if cp.has_section("outputs"):
        for k, v in cp["outputs"].items():
            if k not in OUTPUT_KEYS:
                raise ConfigError(f"unknown output {k!r}")
            cfg.outputs[k] = _bool(v, f"outputs.{k}")
    domain_from_spec(cfg.model(), cfg.domain, source, dry=True)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), path)


def _labels(text: str) -> list[str]:
    labels = [s.strip().upper() for s in text.replace(",", " ").split()]
    if len(labels) == 1 and len(labels[0]) > 1:
        labels = list(labels[0])
    if not all(k in ("A", "B", "C") for k in labels):
        raise ConfigError(f"labels must be A, B or C, got {text!r}")
    return labels


def _data(text: str | None, labels: list[str]) -> list[float | None]:
    if text is None:
        return [0.0 if k == "C" else None for k in labels]
    vals = _floats(text, "domain.data")
    if len(vals) != len(labels):
        raise ConfigError("domain.data needs one value per edge (ignored on A/B edges)")
    return [v if k == "C" else None for v, k in zip(vals, labels)]


def read_polygon_file(path: Path):
    """Vertex table with columns ``x, t, label, data``; row i describes edge i -> i+1."""
    pts, labels, data = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#") or row[0].strip() == "x":
                continue
            if len(row) < 3:
                raise ConfigError(f"{path}: rows need x, t, label[, data]")
            try:
                pts.append((float(row[0]), float(row[1])))
                labels.append(row[2].strip().upper())
                data.append(float(row[3]) if len(row) > 3 and row[3].strip() else 0.0)
            except ValueError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    if len(pts) < 3:
        raise ConfigError(f"{path}: a polygon needs at least 3 vertices")
    if not all(k in ("A", "B", "C") for k in labels):
        raise ConfigError(f"{path}: labels must be A, B or C")
    return pts, labels, [d if k == "C" else None for d, k in zip(data, labels)]


def domain_from_spec(m: MetricModel, spec: dict, source: Path | None = None, dry: bool = False):
    """Build the domain named in a ``[domain]`` section.  ``dry`` only validates keys."""
    kind = spec.get("type", "").strip().lower()
    if kind == "scherk":
        missing = [k for k in ("a", "b", "r") if k not in spec]
        if missing:
            raise ConfigError(f"scherk domain needs {', '.join(missing)}")
        a, b, r = (_expr(spec[k], f"domain.{k}") for k in ("a", "b", "r"))
        s = _expr(spec["s"], "domain.s") if "s" in spec else -r
        labels = _labels(spec.get("labels", "ACAC"))
        if len(labels) != 4:
            raise ConfigError("scherk domain needs four labels")
        data = _data(spec.get("data"), labels)
        if dry:
            return None
        return scherk_quadrilateral(m, a, b, r, s, labels, data)
    if kind == "polygon":
        if "points" not in spec or "labels" not in spec:
            raise ConfigError("polygon domain needs points and labels")
        flat = _floats(spec["points"], "domain.points")
        if len(flat) % 2 or len(flat) < 6:
            raise ConfigError("domain.points must list at least three x, t pairs")
        pts = np.array(flat).reshape(-1, 2)
        labels = _labels(spec["labels"])
        if len(labels) != len(pts):
            raise ConfigError("one label per polygon side")
        data = _data(spec.get("data"), labels)
        return None if dry else polygon_domain(m, pts, labels, data)
    if kind == "file":
        if "path" not in spec:
            raise ConfigError("file domain needs path")
        p = Path(spec["path"])
        if not p.is_absolute() and source is not None:
            p = source.parent / p
        if not p.is_file():
            raise ConfigError(f"domain file not found: {p}")
        pts, labels, data = read_polygon_file(p)
        return None if dry else polygon_domain(m, pts, labels, data)
    raise ConfigError(f"unknown domain type {kind!r} (scherk, polygon, file)")


# -------------------------------------------------------------------- field output

def fields_table(fields: list[SolutionField]) -> str:
    """CSV: one row per vertex, one ``u`` column per cap, 17 significant digits."""
    mesh = fields[0].mesh
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vertex", "x", "t", "boundary"] + [f"u_cap_{f.cap:g}" for f in fields])
    bnd = mesh.is_boundary
    cols = np.stack([f.u for f in fields], axis=1)
    for i, (x, t) in enumerate(mesh.vertices):
        w.writerow([i, f"{x:.17g}", f"{t:.17g}", int(bnd[i])] + [f"{v:.17g}" for v in cols[i]])
    return buf.getvalue()


def rows_to_csv(rows: list[list[str]]) -> str:
    buf = _io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def vtk_text(mesh: TriMesh, fields: list[SolutionField], title: str = "jsgraph fields") -> str:
    """Legacy ASCII VTK unstructured grid, one point scalar per cap (z = 0)."""
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_vertices} double")
    lines += [f"{x:.17g} {t:.17g} 0" for x, t in mesh.vertices]
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines.append(f"POINT_DATA {mesh.n_vertices}")
    for f in fields:
        lines.append(f"SCALARS u_cap_{f.cap:g} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [f"{v:.17g}" for v in f.u]
    return "\n".join(lines) + "\n"


def read_vtk_points(text: str) -> np.ndarray:
    lines = text.splitlines()
    k = next(i for i, ln in enumerate(lines) if ln.startswith("POINTS"))
    n = int(lines[k].split()[1])
    return np.array([[float(v) for v in ln.split()[:2]] for ln in lines[k + 1:k + 1 + n]])


class Manifest:
    """``MANIFEST`` listing the files of a run and its completion status.

    Written before any output so an interrupted run is never left without one.
    """

    def __init__(self, directory: Path, command: str):
        self.dir = Path(directory)
        self.command = command
        self.files: list[tuple[str, str]] = []
        self.notes: list[str] = []
        self.status = "running"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.flush()

    def write(self, name: str, text: str, what: str = "") -> Path:
        p = self.dir / name
        p.write_text(text, encoding="utf-8")
        self.files.append((name, what))
        self.flush()
        return p

    def note(self, text: str) -> None:
        self.notes.append(text)

    def finish(self, status: str) -> None:
        self.status = status
        self.flush()

    def flush(self) -> None:
        lines = [f"command: {self.command}", f"status: {self.status}"]
        lines += [f"file: {name}" + (f" ({what})" if what else "") for name, what in self.files]
        lines += [f"note: {n}" for n in self.notes]
        (self.dir / "MANIFEST").write_text("\n".join(lines) + "\n", encoding="utf-8")


# -------------------------------------------------------------------- example configs

EXAMPLES = {
    "scherk": """\
# Scherk-type quadrilateral in R^3 (c = 1): two grim reapers, two vertical lines.
# A edges on the reapers, C edges (data 0) on the lines.  Satisfies the
# structural condition (threshold r* = asin(1/3) for b = log 2).
[experiment]
metric = r3
c = 1
output = out-scherk

[domain]
type = scherk
a = 0
b = log(2)
r = 0.3
labels = ACAC
data = 0, 0, 0, 0

[solver]
h_target = 0.02
caps = 2, 4, 8, 16
tol = 1e-10
threshold = 0.5

[outputs]
fields = true
vtk = true
flux = true
divergence = true
checks = true
""",
    "scherk-divergent": """\
# Same quadrilateral with r = 0.45: the structural condition fails and the
# cap sequence diverges.  verify_h adds a coarser run for the refinement check.
[experiment]
metric = r3
c = 1
output = out-scherk-divergent

[domain]
type = scherk
a = 0
b = log(2)
r = 0.45
labels = ACAC

[solver]
h_target = 0.02
verify_h = 0.04
caps = 2, 4, 8, 16
allow_divergent = true
""",
    "scherk-balanced": """\
# A/B quadrilateral without C edges, balanced at r = asin(tanh(1/2)) for b = 1.
[experiment]
metric = r3
c = 1
output = out-scherk-balanced

[domain]
type = scherk
a = 0
b = 1
r = asin(0.46211715726000974)
labels = ABAB

[solver]
h_target = 0.04
caps = 1, 2, 3, 4
""",
    "h2xr": """\
# Quadrilateral bounded by reapers and drift lines in H^2 x R (c = 1).
[experiment]
metric = h2xr
c = 1
output = out-h2xr

[domain]
type = scherk
a = 0
b = 0.7
r = 0.1
labels = ACAC

[solver]
h_target = 0.04
caps = 2, 4, 8
""",
}
