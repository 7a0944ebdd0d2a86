"""Command-line front end.

    hyperwalk walk exact|sample ...
    hyperwalk verify <check> ...
    hyperwalk experiment theorem1|kesten|conjclass ...

Every command writes its artifacts plus a ``manifest.json`` to the output
directory (``--out``, else ``$HYPERWALK_OUT``, else ``./hyperwalk-out``).
Only the manifest carries timestamps, so the other files are byte-identical
across reruns with the same inputs.

Exit status: 0 for PASS/ADVISORY, 1 for a violated inequality, 2 for errors.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .exceptions import BoundViolation, HyperwalkError
from .experiments import (
    ExperimentConfig,
    class_members,
    run_conjclass_bound,
    run_kesten,
    run_theorem1,
    verify_symmetry_identity,
)
from .geometry import (
    concatenation_scan,
    default_delta,
    four_point_scan,
    geodesic_bound_scan,
)
from .groups import enumerate_ball, parse_group
from .powers import (
    conjugacy_class_of,
    decompose_conjugate,
    decompose_power,
    power_decomposition_sweep,
)
from .walk import (
    iter_distributions,
    n_step_distribution,
    parse_measure,
    sample_paths,
    splitting_sweep,
)

CHECKS = ("lemma-splitting", "lemma-conjugate", "lemma-34delta", "lemma-classbound",
          "concatenation", "four-point", "geodesic-distance", "musymmetric")
ALIASES = {"3.1": "lemma-splitting", "3.2": "lemma-conjugate", "3.3": "lemma-34delta",
           "3.4": "lemma-classbound", "2.1": "concatenation", "prop1-2": "four-point",
           "prop1-3": "geodesic-distance", "lemma-14delta": "lemma-conjugate"}


class Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []
        root.mkdir(parents=True, exist_ok=True)

    def write_text(self, name: str, text: str):
        (self.root / name).write_text(text, encoding="utf-8", newline="\n")
        self.files.append(name)

    def write_json(self, name: str, obj):
        self.write_text(name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def write_csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        self.write_text(name, buf.getvalue())


def _jsonable(o):
    if isinstance(o, Fraction):
        return str(o)
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    return str(o)


def code_hash() -> str:
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get("HYPERWALK_OUT") or "hyperwalk-out")


# ---------------------------------------------------------------------------
# walk
# ---------------------------------------------------------------------------

def cmd_walk(args, out: Outputs) -> dict:
    model = parse_group(args.group, args.radius)
    mu = parse_measure(args.measure, model)
    if args.action == "exact":
        dist = n_step_distribution(mu, args.n, args.mode)
        if dist.exact:
            out.write_csv("distribution.csv",
                          ("word", "probability_numerator", "probability_denominator"),
                          dist.rows())
        else:
            out.write_csv("distribution.csv", ("word", "probability"), dist.rows())
        pmax, arg = dist.max_probability()
        summary = {"n": args.n, "mode": args.mode, "support_size": len(dist),
                   "total_mass": str(dist.total_mass()), "max_probability": str(pmax),
                   "argmax": str(arg), "identity_probability": str(dist.probability(model.identity))}
    else:
        res = sample_paths(mu, args.n, args.count, args.seed, events=("identity", "proper-power"),
                           keep_endpoints=True, threads=args.threads)
        rows = sorted(res.endpoints.items(), key=lambda kv: (len(kv[0]), kv[0]))
        out.write_csv("endpoints.csv", ("word", "count"),
                      [(model.format_word(w), c) for w, c in rows])
        summary = {"n": args.n, "count": args.count, "seed": args.seed}
        for ev in res.events:
            lo, hi = res.interval(ev)
            summary[ev] = {"frequency": res.frequency(ev), "wilson_99": [lo, hi]}
    out.write_json("summary.json", summary)
    return {"verdict": "PASS", "summary": summary}


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _delta_arg(args, model):
    return args.delta if args.delta is not None else default_delta(model).delta


def cmd_verify(args, out: Outputs) -> dict:
    check = ALIASES.get(args.check, args.check)
    if check not in CHECKS:
        raise HyperwalkError(f"unknown check {args.check!r}; known: {', '.join(CHECKS)}")
    model = parse_group(args.group, args.ball_radius)
    delta = _delta_arg(args, model)
    R = args.radius
    if check == "lemma-splitting":
        mu = parse_measure(args.measure, model)
        rep = splitting_sweep(mu, R, K_values=tuple(range(args.kmax + 1)),
                              n_values=range(1, args.nmax + 1), delta=delta).to_json()
    elif check == "four-point":
        rep = four_point_scan(enumerate_ball(model, R), seed=args.seed).to_json()
    elif check == "geodesic-distance":
        rep = geodesic_bound_scan(model, R, delta).to_json()
    elif check == "concatenation":
        rep = concatenation_scan(model, R, (0, 1), delta).to_json()
    elif check == "lemma-conjugate":
        rep = {"check": check, "ball_radius": R, "delta": delta, "violations": [],
               "tuples_checked": 0, "max_defect": 0}
        for x in enumerate_ball(model, R):
            try:
                dec = decompose_conjugate(x, delta=delta)
            except BoundViolation as exc:
                rep["violations"].append(exc.witnesses)
                continue
            rep["tuples_checked"] += 1
            rep["max_defect"] = max(rep["max_defect"], dec.defect)
    elif check == "lemma-34delta":
        rep = _verify_power(args, model, delta)
    elif check == "lemma-classbound":
        cfg = ExperimentConfig(group=args.group, measure=args.measure, n_max=args.nmax,
                               A=args.A if args.A is not None else 3, radius=args.ball_radius)
        mu = cfg.step_measure(model)
        laws = list(iter_distributions(mu, cfg.n_max, "exact"))
        rep = {"check": check, "classes": [], "violations": [], "A": cfg.A}
        for C in _classes_up_to(model, args.class_max):
            res = run_conjclass_bound(cfg, C, mu, laws)
            rep["classes"].append(str(C.representative))
            rep["violations"] += [dict(v, cls=str(C.representative)) for v in res.violations]
        rep["tuples_checked"] = len(rep["classes"]) * cfg.n_max
    else:  # musymmetric
        mu = parse_measure(args.measure, model)
        k = args.kmax_sym
        laws = list(iter_distributions(mu, k, "exact"))
        rep = {"check": check, "violations": [], "tuples_checked": 0}
        for word in ("e", args.class_word):
            members = [model.identity] if word == "e" else \
                class_members(conjugacy_class_of(model.element(word)), k)
            for k2 in range(k + 1):
                for k4 in range(k + 1):
                    r = verify_symmetry_identity(mu, members, k2, k4, laws)
                    rep["tuples_checked"] += 1
                    if not r.holds:
                        rep["violations"].append({"class": word, "k2": k2, "k4": k4,
                                                  "lhs": str(r.lhs), "rhs": str(r.rhs)})
    rep.setdefault("check", check)
    rep["group"] = model.backend_id
    out.write_json("report.json", rep)
    if rep.get("violations"):
        verdict = "VIOLATION"
    elif rep.get("status") == "hypothesis-not-met":
        verdict = "ADVISORY"
    else:
        verdict = "PASS"
    return {"verdict": verdict, "summary": rep}


def _classes_up_to(model, L):
    seen = {}
    for x in enumerate_ball(model, L):
        C = conjugacy_class_of(x)
        if C.length <= L and C.representative not in seen:
            seen[C.representative] = C
    return [seen[k] for k in sorted(seen, key=lambda g: (g.length, g.word))]


def _verify_power(args, model, delta):
    if args.hypothesis_violating_input:
        h = model.generators()[0]
        dec = decompose_power(h, 2, model.identity, delta)
        return {"check": "lemma-34delta", "status": dec.status, "example": dec.to_dict(),
                "violations": [], "tuples_checked": 1, "hypotheses_met": 0, "delta": delta}
    rep = power_decomposition_sweep(model, args.samples, args.seed, args.radius, delta=delta)
    rep["check"] = "lemma-34delta"
    return rep


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _config(args) -> ExperimentConfig:
    values = {}
    if args.config:
        values.update(ExperimentConfig.from_ini(args.config).to_dict())
    for key in ("group", "measure", "n_max", "exact_max", "samples", "seed", "A",
                "tolerance", "threads", "class_word", "radius"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    values.pop("out_dir", None)
    return ExperimentConfig(**values)


def _series_files(out: Outputs, series, rho):
    out.write_csv("series.csv", ("n", "value", "ci_low", "ci_high", "method"), series.rows())
    lines = ["# n log(q_n / rho^n)"]
    for n, v, *_ in series.points:
        if v > 0:
            lines.append(f"{n} {math.log(v) - n * math.log(rho)!r}")
    out.write_text("plot.dat", "\n".join(lines) + "\n")


def cmd_experiment(args, out: Outputs) -> dict:
    cfg = _config(args)
    if args.name == "kesten":
        res = run_kesten(cfg)
        rho = res.rho.value if res.rho else max(res.series.values)
        _series_files(out, res.series, rho)
        fit = res.fit.to_dict()
        fit.update(verdict=res.verdict, checks=res.checks, rho=rho,
                   final=res.series.points[-1][1] if res.series.points else None, A_star=None)
        out.write_json("fit.json", fit)
        return {"verdict": res.verdict, "summary": fit, "config": cfg.to_dict()}
    if args.name == "theorem1":
        res = run_theorem1(cfg)
        _series_files(out, res.series, res.rho)
        if res.mc is not None:
            out.write_csv("series_mc.csv", ("n", "value", "ci_low", "ci_high", "method"),
                          res.mc.rows())
        summary = res.summary()
        out.write_json("fit.json", summary)
        verdict = "VIOLATION" if res.verdict == "FAIL" else res.verdict
        return {"verdict": verdict, "summary": summary, "config": cfg.to_dict()}
    model = cfg.model()
    C = conjugacy_class_of(model.element(cfg.class_word))
    res = run_conjclass_bound(cfg, C)
    _series_files(out, res.series, res.rho)
    summary = {"class": str(C.representative), "class_length": C.length, "A": res.A,
               "rho": res.rho, "verdict": res.verdict, "violations": res.violations}
    out.write_json("fit.json", summary)
    return {"verdict": "VIOLATION" if res.violations else "PASS", "summary": summary,
            "config": cfg.to_dict()}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyperwalk", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--group", default="free:2")
        sp.add_argument("--measure", default="lazy-uniform")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out")

    w = sub.add_parser("walk", help="exact law or sampled endpoints of g_n")
    w.add_argument("action", choices=("exact", "sample"))
    common(w)
    w.add_argument("--n", type=int, required=True)
    w.add_argument("--mode", choices=("exact", "float"), default="exact")
    w.add_argument("--count", type=int, default=10_000)
    w.add_argument("--radius", type=int, default=3, help="ball radius for ball-table groups")

    v = sub.add_parser("verify", help="run one of the inequality checkers")
    v.add_argument("check")
    common(v)
    v.add_argument("--radius", type=int, default=3)
    v.add_argument("--ball-radius", type=int, default=4,
                   help="validated radius for ball-table groups")
    v.add_argument("--nmax", type=int, default=8)
    v.add_argument("--kmax", type=int, default=2)
    v.add_argument("--kmax-sym", type=int, default=6)
    v.add_argument("--delta", type=float)
    v.add_argument("--A", type=float)
    v.add_argument("--class-max", type=int, default=4)
    v.add_argument("--class-word", default="ab")
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--hypothesis-violating-input", action="store_true")

    e = sub.add_parser("experiment", help="end-to-end experiments")
    e.add_argument("name", choices=("theorem1", "kesten", "conjclass"))
    e.add_argument("--config")
    e.add_argument("--group")
    e.add_argument("--measure")
    e.add_argument("--seed", type=int)
    e.add_argument("--threads", type=int)
    e.add_argument("--out")
    e.add_argument("--nmax", dest="n_max", type=int)
    e.add_argument("--exact-max", type=int)
    e.add_argument("--samples", type=int)
    e.add_argument("--A", type=float)
    e.add_argument("--tolerance", type=float)
    e.add_argument("--class-word")
    e.add_argument("--radius", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Outputs(_out_dir(args))
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    handler = {"walk": cmd_walk, "verify": cmd_verify, "experiment": cmd_experiment}
    try:
        result = handler[args.command](args, out)
        status = 1 if result["verdict"] == "VIOLATION" else 0
    except BoundViolation as exc:
        result, status = {"verdict": "VIOLATION", "error": exc.to_dict()}, 1
        out.write_json("error.json", exc.to_dict())
    except (HyperwalkError, ValueError, OSError) as exc:
        err = exc.to_dict() if isinstance(exc, HyperwalkError) else \
            {"error": type(exc).__name__, "message": str(exc)}
        result, status = {"verdict": "ERROR", "error": err}, 2
        out.write_json("error.json", err)
    manifest = {
        "command": args.command,
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k != "out"},
        "seed": getattr(args, "seed", None),
        "verdict": result["verdict"],
        "code_version": __version__,
        "code_hash": code_hash(),
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "files": list(out.files),
    }
    if "config" in result:
        manifest["config"] = result["config"]
        manifest["seed"] = result["config"]["seed"]
    out.files.append("manifest.json")
    manifest["files"] = list(out.files)
    (out.root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
    line = {"verdict": result["verdict"], "out": str(out.root)}
    if "error" in result:
        line["error"] = result["error"]
    print(json.dumps(line, sort_keys=True, default=_jsonable))
    return status


if __name__ == "__main__":
    sys.exit(main())
