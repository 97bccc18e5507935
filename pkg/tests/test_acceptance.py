"""One test per acceptance criterion, each at its stated tolerance and time budget."""
import math
import time

import numpy as np

from jsgraph.analysis import classify_convergence, flux_report
from jsgraph.curves import f_length, shoot_geodesic
from jsgraph.domain import check_existence, scherk_quadrilateral
from jsgraph.io import fields_table, rows_to_csv
from jsgraph.metric import euclidean_r3
from jsgraph.solver import CapSchedule, comparison_check, solve_dirichlet, solve_jenkins_serrin

from conftest import ACCEPTANCE_LINES, B_SCHERK, R_STAR
from helpers import mms_errors

CAPS = (2, 4, 8, 16)


def report(n, name, ok, detail):
    line = f"criterion {n} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def bisect(pred, lo, hi, tol):
    """Boundary of ``pred`` with ``pred(lo)`` true and ``pred(hi)`` false."""
    assert pred(lo) and not pred(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_criterion_1_geodesic_oracle():
    t0 = time.perf_counter()
    m = euclidean_r3(1.0)
    right = shoot_geodesic(m, (0.0, 0.0), 0.0, 2.0)
    left = shoot_geodesic(m, (0.0, 0.0), math.pi, 2.0)
    pts = np.vstack([left.samples[::-1], right.samples[1:]])
    sel = np.abs(pts[:, 0]) <= 1.2
    covered = pts[sel, 0].min() <= -1.2 + 0.005 and pts[sel, 0].max() >= 1.2 - 0.005
    err = float(np.max(np.abs(pts[sel, 1] + np.log(np.cos(pts[sel, 0])))))
    dt = time.perf_counter() - t0
    report(1, "geodesic oracle", covered and err <= 1e-6 and dt < 1.0, f"sup error {err:.2e}, {dt:.2f}s")


def test_criterion_2_length_oracle():
    t0 = time.perf_counter()
    m = euclidean_r3(1.0)
    worst = 0.0
    for r in (0.1, 0.2, 0.3, 0.4, 0.5):
        for b in (0.2, 0.4, 0.6, 0.8, 1.0):
            a, s = 0.0, -r
            d = scherk_quadrilateral(m, a, b, r, s)
            L = [f_length(m, e.curve) for e in d.edges]
            reapers = (math.exp(b) + math.exp(a)) * (math.tan(r) - math.tan(s))
            sides = (math.exp(b) - math.exp(a)) * (1 / math.cos(r) + 1 / math.cos(s))
            worst = max(worst, abs(L[0] + L[2] - reapers) / reapers, abs(L[1] + L[3] - sides) / sides)
    dt = time.perf_counter() - t0
    report(2, "length oracle", worst <= 1e-8 and dt < 1.0, f"max relative error {worst:.2e}, {dt:.2f}s")


def test_criterion_3_structural_boundary():
    t0 = time.perf_counter()
    m = euclidean_r3(1.0)

    def passes(r):
        return check_existence(m, scherk_quadrilateral(m, 0.0, B_SCHERK, r, -r)).passes

    r = bisect(passes, 0.3, 0.4, 1e-6)
    dt = time.perf_counter() - t0
    err = abs(r - R_STAR)
    report(3, "structural-condition boundary", err <= 1e-6 and dt < 10.0,
           f"r = {r:.8f} vs {R_STAR:.8f}, error {err:.1e}, {dt:.2f}s")


def test_criterion_4_case_b_balance():
    t0 = time.perf_counter()
    m = euclidean_r3(1.0)

    def alpha_short(r):
        v = check_existence(m, scherk_quadrilateral(m, 0.0, 1.0, r, -r, labels="ABAB"))
        return v.balance < 0  # alpha_f(Ω) < beta_f(Ω)

    r = bisect(alpha_short, 0.3, 0.6, 1e-7)
    dt = time.perf_counter() - t0
    want = math.asin(math.tanh(0.5))
    verdict = check_existence(m, scherk_quadrilateral(m, 0.0, 1.0, r, -r, labels="ABAB"))
    err = abs(r - want)
    ok = err <= 1e-6 and verdict.status == "case_b" and dt < 10.0
    report(4, "case (b) balance", ok, f"r = {r:.8f} vs {want:.8f}, error {err:.1e}, verdict {verdict.status}, {dt:.2f}s")


def test_criterion_5_mms_convergence():
    t0 = time.perf_counter()
    e = mms_errors(euclidean_r3(1.0), (0.1, 0.05, 0.025))
    orders = np.log2(e[:-1] / e[1:])
    dt = time.perf_counter() - t0
    report(5, "MMS convergence", orders[-1] >= 1.8 and dt < 60.0,
           f"L2 errors {', '.join(f'{x:.3e}' for x in e)}; orders {orders[0]:.2f}, {orders[1]:.2f}; {dt:.1f}s")


def test_criterion_6_maximum_principle_uniqueness():
    t0 = time.perf_counter()
    m = euclidean_r3(1.0)
    d = scherk_quadrilateral(m, 0.0, B_SCHERK, 0.3, -0.3)
    run = solve_jenkins_serrin(m, d, CapSchedule(CAPS), h_target=0.02)
    worst = 0.0
    mono = True
    for lo, hi in zip(run.fields, run.fields[1:]):
        rep = comparison_check(lo, hi, tol=1e-8 * hi.cap)
        mono &= rep.passed
        worst = max(worst, rep.worst_violation)
    g = run.fields[-1].boundary_values
    a = solve_dirichlet(m, run.mesh, g)
    guess = np.random.default_rng(11).uniform(-16, 16, run.mesh.n_vertices)
    b = solve_dirichlet(m, run.mesh, g, initial_guess=guess)
    diff = float(np.max(np.abs(a.u - b.u)))
    dt = time.perf_counter() - t0
    ok = mono and diff <= 1e-6 and dt < 120.0
    report(6, "maximum principle / uniqueness", ok,
           f"monotone {'yes' if mono else 'no'}, worst u_n - u_2n = {worst:.2e} (tol 1e-8 cap); "
           f"uniqueness max|u1-u2| = {diff:.1e}; {dt:.1f}s")


def _criterion_7_run():
    m = euclidean_r3(1.0)
    d = scherk_quadrilateral(m, 0.0, B_SCHERK, 0.3, -0.3)
    run = solve_jenkins_serrin(m, d, CapSchedule(CAPS), h_target=0.02)
    return m, d, run, [flux_report(f, d) for f in run.fields]


def test_criterion_7_flux_properties():
    t0 = time.perf_counter()
    _, d, run, reports = _criterion_7_run()
    h = run.mesh.h_target
    bound = all(fr.bound_ok(1e-6) for fr in reports)
    balance = all(abs(fr.total) <= 0.05 * h * fr.perimeter_f for fr in reports)
    a_edges = [i for i, k in enumerate(d.kinds) if k == "A"]
    ratios = np.array([[fr.ratio[i] for i in a_edges] for fr in reports])
    increasing = bool(np.all(np.diff(ratios, axis=0) > 0))
    final = ratios[-1].min()
    dt = time.perf_counter() - t0
    ok = run.complete and bound and balance and increasing and final >= 0.9 and h <= 0.02 and dt < 600
    margin = max(float(np.max(np.abs(fr.flux) - fr.f_length)) for fr in reports)
    total = max(abs(fr.total) for fr in reports)
    report(7, "flux properties", ok,
           f"max(|F|-L_f) = {margin:.3g}, max |F[dΩ]| = {total:.1e}, "
           f"A-edge F/L by cap {np.round(ratios, 4).tolist()}, {dt:.1f}s")


def test_criterion_8_divergence_detection():
    t0 = time.perf_counter()
    m = euclidean_r3(1.0)
    d = scherk_quadrilateral(m, 0.0, B_SCHERK, 0.45, -0.45)
    reps = {}
    for h in (0.04, 0.02):
        run = solve_jenkins_serrin(m, d, CapSchedule(CAPS), h_target=h)
        reps[h] = classify_convergence(run.fields)
    nonempty = not reps[0.02].empty and not reps[0.04].empty
    kf = [reps[h].interface_max_kf() for h in (0.04, 0.02)]
    verts = d.vertices
    ends_ok = True
    worst_end = 0.0
    for h, rep in reps.items():
        for p in rep.polylines:
            for q in (p.points[0], p.points[-1]):
                dist = float(np.min(np.hypot(*(verts - q).T)))
                worst_end = max(worst_end, dist / h)
                ends_ok &= dist <= 2 * h
    dt = time.perf_counter() - t0
    ok = nonempty and kf[1] < kf[0] and ends_ok and dt < 600
    report(8, "divergence detection", ok,
           f"divergent cells {int(reps[0.04].divergent_cells.sum())}/{int(reps[0.02].divergent_cells.sum())}, "
           f"interface max|k_f| {kf[0]:.2e} -> {kf[1]:.2e}, worst endpoint distance {worst_end:.2f} h, {dt:.1f}s")


def test_criterion_9_determinism():
    t0 = time.perf_counter()
    outputs = []
    for _ in range(2):
        _, _, run, reports = _criterion_7_run()
        rows = [["cap", "edge", "kind", "flux", "f_length", "ratio"]]
        for fr in reports:
            rows += [[f"{fr.cap:.17g}"] + r for r in fr.csv_rows()[1:]]
        outputs.append((fields_table(run.fields) + rows_to_csv(rows)).encode())
    same = outputs[0] == outputs[1]
    dt = time.perf_counter() - t0
    report(9, "determinism", same, f"{len(outputs[0])} bytes, identical: {same}, {dt:.1f}s")
