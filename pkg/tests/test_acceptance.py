"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py -s`` to see the per-criterion lines
as they happen; the terminal summary repeats them in order.
"""
import itertools
import math
import time

import pytest

from hyperwalk.cli import main
from hyperwalk.experiments import (
    ExperimentConfig,
    class_members,
    run_conjclass_bound,
    run_kesten,
    run_theorem1,
    verify_symmetry_identity,
)
from hyperwalk.geometry import concatenation_scan, default_delta, four_point_scan, geodesic_bound_scan
from hyperwalk.groups import FreeGroup, FreeProductCyclics, enumerate_ball
from hyperwalk.powers import (
    conjugacy_class_of,
    decompose_conjugate,
    is_proper_power,
    power_decomposition_sweep,
)
from hyperwalk.walk import (
    StepMeasure,
    check_pointwise_bound,
    iter_distributions,
    lazy_uniform,
    return_probabilities,
    rho_closed_form,
    rho_rayleigh_ball,
    splitting_sweep,
)

from oracles import brute_force_proper_powers

F2 = FreeGroup(2)
PSL = FreeProductCyclics((2, 3), names="st")
MU = lazy_uniform(F2)
RHO = 0.2 + 0.8 * math.sqrt(3) / 2
RHO_REF = 0.892820


def report(number, ok, detail):
    print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def laws12():
    return list(iter_distributions(MU, 12))


@pytest.mark.criterion(1, "exactness suite on lazy-uniform F2")
def test_criterion_01_exactness(laws12):
    mass = all(d.total_mass() == 1 for d in laws12)
    symmetric = all(d.probability(g.inverse()) == p for d in laws12 for g, p in d.items())
    r = return_probabilities(MU, 40)
    supermult = all(r[2 * (a + b)] >= r[2 * a] * r[2 * b]
                    for a in range(21) for b in range(21 - a))
    rho = rho_closed_form(MU)
    assert rho.value == pytest.approx(RHO, abs=1e-15)
    pointwise = all(check_pointwise_bound(MU, d.n, rho, d).holds for d in laws12)
    ok = mass and symmetric and supermult and pointwise
    report(1, ok, f"mass={mass} symmetry={symmetric} supermultiplicative={supermult} "
                  f"pointwise={pointwise}")
    assert ok


@pytest.mark.criterion(2, "splitting inequality, R=3, K<=2, n<=8, delta=1")
def test_criterion_02_splitting():
    t = time.perf_counter()
    rep = splitting_sweep(MU, radius=3, K_values=(0, 1, 2), n_values=range(1, 9), delta=1)
    elapsed = time.perf_counter() - t
    ok = rep.holds and rep.tuples_checked > 0 and elapsed < 600
    report(2, ok, f"tuples={rep.tuples_checked} violations={len(rep.violations)} "
                  f"min_slack={rep.min_slack} time={elapsed:.1f}s")
    assert ok


@pytest.mark.criterion(3, "conjugate decomposition within 14 delta")
def test_criterion_03_conjugate():
    checked, violations, free_defect = 0, [], 0
    for model, R in ((F2, 6), (PSL, 5)):
        delta = default_delta(model).delta
        for x in enumerate_ball(model, R):
            dec = decompose_conjugate(x, delta=delta)
            checked += 1
            if dec.g * dec.h * dec.g.inverse() != x or dec.total > x.length + 14 * delta:
                violations.append(str(x))
            if model is F2:
                free_defect = max(free_defect, abs(dec.defect))
    ok = not violations and free_defect == 0
    report(3, ok, f"elements={checked} violations={len(violations)} F2 max defect={free_defect}")
    assert ok


@pytest.mark.criterion(4, "power decomposition sweep, 34 delta and 8 delta")
def test_criterion_04_power_sweep():
    rep = power_decomposition_sweep(F2, samples=1000, seed=0, radius=3,
                                    lengths=(16, 20), exponents=(2, 3), delta=1)
    ok = (rep["status"] == "holds" and rep["samples"] >= 1000
          and rep["hypotheses_met"] == rep["tuples_checked"])
    report(4, ok, f"tuples={rep['tuples_checked']} violations={len(rep['violations'])} "
                  f"min slack 34={rep['min_slack_34']} 8={rep['min_slack_8']}")
    assert ok


@pytest.mark.criterion(5, "class bound n^3 rho^n for |C| <= 4, n <= 12")
def test_criterion_05_classbound(laws12):
    classes = {}
    for x in enumerate_ball(F2, 4):
        C = conjugacy_class_of(x)
        classes.setdefault(C.representative, C)
    cfg = ExperimentConfig(n_max=12, A=3)
    violations = []
    for C in classes.values():
        violations += run_conjclass_bound(cfg, C, MU, laws12, A=3).violations
    ok = not violations and len(classes) > 1
    report(5, ok, f"classes={len(classes)} violations={len(violations)}")
    assert ok


@pytest.mark.criterion(6, "symmetry identity exact, asymmetric control fails")
def test_criterion_06_symmetry(laws12):
    members = {"ab": class_members(conjugacy_class_of(F2.element("ab")), 6),
               "e": [F2.identity]}
    bad_pairs = []
    for name, m in members.items():
        for k2, k4 in itertools.product(range(7), repeat=2):
            r = verify_symmetry_identity(MU, m, k2, k4, laws12)
            if r.difference != 0:
                bad_pairs.append((name, k2, k4))
    a, A, b, B = (F2.element(w) for w in "aAbB")
    weights = [1, 2, 0, 1, 1]
    asym = StepMeasure.unchecked(F2, {g: w / 5 for g, w in zip((F2.identity, a, A, b, B),
                                                                  weights)})
    asym_laws = list(iter_distributions(asym, 6))
    control_fails = any(not verify_symmetry_identity(asym, members["ab"], k2, k4, asym_laws).holds
                        for k2, k4 in itertools.product(range(7), repeat=2))
    ok = not bad_pairs and control_fails
    report(6, ok, f"nonzero differences={len(bad_pairs)} control fails={control_fails}")
    assert ok


@pytest.mark.criterion(7, "proper-power detector equals brute force on F2 ball R=8")
def test_criterion_07_oracle():
    ball = enumerate_ball(F2, 8)
    found = {str(x) if not x.is_identity else "" for x in ball if is_proper_power(x) is not None}
    oracle = brute_force_proper_powers(2, 8)
    ok = found == oracle
    report(7, ok, f"elements={len(ball)} powers={len(found)} oracle={len(oracle)} "
                  f"disagreements={len(found ^ oracle)}")
    assert ok


@pytest.mark.criterion(8, "Kesten convergence at 2n <= 40 and Rayleigh R=8")
def test_criterion_08_kesten():
    res = run_kesten(ExperimentConfig(n_max=40))
    vals = res.series.values
    bounded = bool((vals <= 0.892821).all())
    monotone = res.checks["doubling_monotone"]
    final = float(vals[-1])
    ray = rho_rayleigh_ball(MU, 8).value
    parts = {"bounded": bounded, "doubling-monotone": monotone, "final>=0.80": final >= 0.80,
             "rayleigh in (0.86, 0.8929)": 0.86 < ray < 0.8929}
    ok = all(parts.values())
    report(8, ok, f"final={final:.6f} rayleigh={ray:.6f} " +
           " ".join(f"{k}={v}" for k, v in parts.items()))
    assert ok, f"failed parts: {[k for k, v in parts.items() if not v]} (final={final:.6f})"


@pytest.mark.criterion(9, "proper-power decay rate, 10^7 paths to n=40")
def test_criterion_09_theorem1():
    cfg = ExperimentConfig(n_max=40, exact_max=12, samples=10_000_000, seed=0, A=5,
                           tolerance=0.02, confidence=0.99)
    t = time.perf_counter()
    res = run_theorem1(cfg)
    elapsed = time.perf_counter() - t
    ok = (res.checks["power_bound_exact_points"]
          and abs(res.fit.rho_hat - RHO_REF) <= 0.02
          and res.checks["mc_consistent_with_exact"]
          and elapsed < 1800)
    report(9, ok, f"rho_hat={res.fit.rho_hat:.5f} |diff|={abs(res.fit.rho_hat - RHO_REF):.5f} "
                  f"A*={res.A_star:.3f} checks={res.checks} time={elapsed:.0f}s")
    assert ok


@pytest.mark.criterion(10, "geometry suite")
def test_criterion_10_geometry():
    defects = {R: four_point_scan(enumerate_ball(F2, R), seed=R).max_defect for R in range(7)}
    concat = {m.backend_id: concatenation_scan(m, 3, (0, 1), 1) for m in (F2, PSL)}
    prop = {m.backend_id: geodesic_bound_scan(m, 3) for m in (F2, PSL)}
    ok = (all(d == 0 for d in defects.values())
          and all(r.holds and r.hypotheses_met > 0 for r in concat.values())
          and all(r.holds for r in prop.values()))
    report(10, ok, f"four-point defects={defects} "
                   f"concatenation={ {k: len(r.violations) for k, r in concat.items()} } "
                   f"geodesic={ {k: len(r.violations) for k, r in prop.items()} }")
    assert ok


CLI_RUNS = [
    ("walk", "exact", "--n", "6"),
    ("walk", "exact", "--n", "8", "--mode", "float"),
    ("walk", "sample", "--n", "10", "--count", "20000", "--seed", "7"),
    ("walk", "exact", "--group", "cyclics:2,3", "--n", "5"),
    ("verify", "lemma-splitting", "--nmax", "4", "--radius", "2"),
    ("verify", "lemma-conjugate", "--radius", "4"),
    ("verify", "lemma-34delta", "--samples", "50", "--seed", "2"),
    ("verify", "lemma-34delta", "--hypothesis-violating-input"),
    ("verify", "lemma-classbound", "--nmax", "6", "--class-max", "2"),
    ("verify", "concatenation", "--radius", "2"),
    ("verify", "four-point", "--radius", "6", "--seed", "3"),
    ("verify", "geodesic-distance", "--radius", "2", "--group", "cyclics:2,3"),
    ("verify", "musymmetric", "--kmax-sym", "3"),
    ("experiment", "kesten", "--nmax", "20"),
    ("experiment", "theorem1", "--nmax", "16", "--exact-max", "6", "--samples", "50000",
     "--seed", "11", "--tolerance", "0.5"),
    ("experiment", "conjclass", "--nmax", "8", "--class-word", "ab"),
]


@pytest.mark.criterion(11, "CLI reruns are byte-identical")
def test_criterion_11_determinism(tmp_path):
    differing = []
    for i, argv in enumerate(CLI_RUNS):
        outs = []
        for rep in range(2):
            out = tmp_path / f"{i}-{rep}"
            extra = ("--threads", "2") if rep and argv[0] != "verify" else ()
            main([*argv, *extra, "--out", str(out)])
            outs.append({p.name: p.read_bytes() for p in out.iterdir() if p.name != "manifest.json"})
        if outs[0] != outs[1] or not outs[0]:
            differing.append(" ".join(argv))
    ok = not differing
    report(11, ok, f"commands={len(CLI_RUNS)} differing={differing}")
    assert ok
