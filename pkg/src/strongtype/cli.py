"""Command-line front end: ``strongtype CONFIG.json`` or ``strongtype --replay REPORT.json``.

Exit codes: 0 pass, 1 invariant failure, 2 config error, 3 certificate violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import platform
import sys
import time
from typing import Any

import numpy as np

from . import __version__, dyadic, duality, martingale, moduli, renorm
from .spaces import DualNotImplemented, LinearOperator, Norm, NormError, adjoint, dual_index, identity

log = logging.getLogger("strongtype")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2, 3
COMMANDS = ("estimate", "verify", "renorm", "duality")
CONFIG_KEYS = {"space", "operator", "command", "params", "seed", "output"}
REPLAY_TOL = 1e-12


class ConfigError(ValueError):
    pass


# -- config -------------------------------------------------------------------


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict) or not cfg:
        raise ConfigError("config must be a non-empty JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg.get("command") not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cfg.get('command')!r}")
    if "space" not in cfg and "operator" not in cfg:
        raise ConfigError("config needs a 'space' or an 'operator'")
    if not isinstance(cfg.get("params", {}), dict):
        raise ConfigError("'params' must be an object")
    return cfg


def build_operator(cfg: dict) -> LinearOperator:
    try:
        space = Norm.from_dict(cfg["space"]) if "space" in cfg else None
        if cfg.get("operator") is None:
            return identity(space)
        return LinearOperator.from_dict(cfg["operator"], space)
    except (NormError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad space/operator: {exc}") from exc


def _param(params: dict, key: str, default: Any = None, kind: type = float) -> Any:
    if key not in params or params[key] is None:
        if default is None:
            raise ConfigError(f"missing parameter {key!r}")
        return default
    try:
        return kind(params[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"parameter {key!r}: {exc}") from exc


def _points(params: dict, dim: int, seed: int, key: str = "points", count_key: str = "n_points",
            default_count: int = 5) -> np.ndarray:
    if key in params:
        P = np.asarray(params[key], dtype=float)
        if P.ndim != 2 or P.shape[1] != dim:
            raise ConfigError(f"{key!r} must be a list of {dim}-vectors")
        return P
    n = _param(params, count_key, default_count, int)
    return np.random.default_rng([seed, dim, n]).normal(size=(n, dim))


# -- commands -------------------------------------------------------------------


def _constant_replay(est, T: LinearOperator) -> dict:
    rec = {"type": "constant", "kind": est.kind, "exponent": est.exponent,
           "operator": T.to_dict(), "witness": est.witness, "value": est.lower_bound}
    out = {"estimate": est.to_dict(), "replay": rec}
    if est.unbounded_flag:
        out["unbounded_replay"] = {"type": "constant", "kind": est.kind, "exponent": est.exponent,
                                   "operator": T.to_dict(), "witness": est.unbounded_witness,
                                   "value": est.unbounded_ratio}
    return out


def cmd_estimate(cfg: dict, T: LinearOperator, seed: int, workers: int) -> tuple[dict, int]:
    params = cfg.get("params", {})
    kind = params.get("kind")
    if kind is None:
        raise ConfigError("estimate needs params.kind")
    try:
        base = moduli.base_kind(kind)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    exponent = _param(params, "exponent")
    depth = _param(params, "depth", 2, int)
    budget = _param(params, "budget", 10_000, int)
    try:
        est = moduli.best_constant(base, T, exponent, depth_cap=depth, budget=budget,
                                   seed=seed, workers=workers)
    except moduli.ExponentError as exc:
        raise ConfigError(str(exc)) from exc
    res = _constant_replay(est, T)
    res["table"] = {"columns": ["kind", "exponent", "depth", "lower_bound", "unbounded"],
                    "rows": [[est.kind, exponent, est.depth, est.lower_bound, est.unbounded_flag]]}
    return res, EXIT_PASS


def _suite(name: str, values: list, tol: float, witnesses: list) -> dict:
    worst = max(values) if values else 0.0
    bad = [w for v, w in zip(values, witnesses) if v > tol]
    return {"suite": name, "checks": len(values), "worst": worst, "tol": tol,
            "passed": not bad, "failures": len(bad), "first_failure": bad[0] if bad else None}


def cmd_verify(cfg: dict, T: LinearOperator, seed: int, workers: int) -> tuple[dict, int]:
    params = cfg.get("params", {})
    tol = _param(params, "tol", 1e-9)
    samples = _param(params, "samples", 200, int)
    depth = _param(params, "depth", 3, int)
    c = _param(params, "c", 1.0)
    p = params.get("p")
    q = params.get("q")
    if p is None and q is None:
        raise ConfigError("verify needs params.p and/or params.q")
    n, m = T.domain.dim, T.codomain.dim
    suites = []

    vals, wits = [], []
    for i in range(samples):
        seq = martingale.random_sequence(seed * 100_003 + i, depth, n, with_initial=True)
        f = martingale.to_step(seq, 0, T.domain, partial=True)
        for k in range(1, depth + 1):
            dk = martingale.to_step(seq, k, T.domain)
            for r in (1, 1.5, 2, 3):
                a = dyadic.lp_norm(f + dk, r)
                b = dyadic.lp_norm(f - dk, r)
                vals.append(abs(a - b))
                wits.append({"sequence": seq.to_dict(), "level": k, "exponent": r})
            f = f + dk
    suites.append(_suite("symmetry", vals, 1e-12, wits))

    rng = np.random.default_rng([seed, 7])
    for side, r in (("type", p), ("cotype", q)):
        if r is None:
            continue
        r = float(r)
        vals, wits, svals, swits = [], [], [], []
        for i in range(samples):
            a = rng.normal(size=m if side == "type" else n)
            b = rng.normal(size=n)
            try:
                vals.append(moduli.depth1_reduction_check(T, a, b, r, c, side=side))
            except moduli.ExponentError as exc:
                raise ConfigError(str(exc)) from exc
            wits.append({"a": a, "b": b})
            seq = martingale.random_sequence(seed * 100_003 + i, 1 + i % depth, n,
                                             with_initial=side == "cotype")
            if side == "type":
                y = rng.normal(size=m)
                rep = moduli.strong_type_defect(T, y, seq, r, c)
                swits.append({"y": y, "sequence": seq.to_dict()})
            else:
                rep = moduli.strong_cotype_defect(T, seq, r, c)
                swits.append({"sequence": seq.to_dict()})
            svals.append(rep.value)
        suites.append(_suite(f"depth1_reduction_{side}", vals, 1e-12, wits))
        suites.append(_suite(f"strong_{side}", svals, tol, swits))

    vals, wits = [], []
    for i in range(samples):
        seq = martingale.random_sequence(seed * 100_003 + i, depth, m)
        g = dyadic.StepFunction(rng.normal(size=(2**depth, m)), T.codomain)
        y = rng.normal(size=m)
        vals.append(duality.pairing_split_check(y, seq, g).value)
        wits.append({"y": y, "sequence": seq.to_dict(), "g": g.values})
    suites.append(_suite("pairing_split", vals, 1e-12, wits))

    for direction, r in (("type_sup", p), ("cotype_inf", q)):
        if r is None:
            continue
        F = renorm.BraceFunctional(direction, T, float(r), c, depth_cap=2, seed=seed)
        Xp, Xm = rng.normal(size=(min(samples, 20), n)), rng.normal(size=(min(samples, 20), n))
        try:
            out = renorm.midpoint_arrays(F, Xp, Xm, 1)
            vals = list(out["value"])
            wits = [{"x_plus": a, "x_minus": b} for a, b in zip(Xp, Xm)]
            suites.append(_suite(f"midpoint_{direction}", vals, 1e-6, wits))
        except renorm.CertificateViolation as exc:
            suites.append({"suite": f"midpoint_{direction}", "checks": 0, "passed": False,
                           "failures": 1, "first_failure": exc.to_dict()})

    ok = all(s["passed"] for s in suites)
    rows = [[s["suite"], s["checks"], s.get("worst"), s.get("tol"), s["passed"]] for s in suites]
    res = {"suites": moduli._jsonable(suites), "passed": ok,
           "table": {"columns": ["suite", "checks", "worst", "tol", "passed"], "rows": rows}}
    return res, EXIT_PASS if ok else EXIT_FAIL


def _functional(params: dict, T: LinearOperator, seed: int, depth: int) -> renorm.BraceFunctional:
    direction = params.get("direction", "cotype_inf")
    try:
        return renorm.BraceFunctional(direction, T, _param(params, "exponent"),
                                      _param(params, "c", 1.0), depth_cap=depth + 1,
                                      budget=_param(params, "brace_budget", 256, int), seed=seed)
    except (renorm.RenormError, moduli.ExponentError) as exc:
        raise ConfigError(str(exc)) from exc


def _brace_replay(F: renorm.BraceFunctional, x, seq, value) -> dict:
    return {"type": "brace", "functional": F.to_dict(), "x": np.asarray(x).tolist(),
            "sequence": seq.to_dict(), "value": float(value)}


def cmd_renorm(cfg: dict, T: LinearOperator, seed: int, workers: int) -> tuple[dict, int]:
    params = cfg.get("params", {})
    N = _param(params, "depth", 3, int)
    F = _functional(params, T, seed, N)
    tol = _param(params, "tol", 1e-6)
    X = _points(params, F.dim, seed)
    r = F.exponent
    checks = []
    try:
        res = F.evaluate(X, N)
        s = T.domain(X)
        Tx = T.codomain(X @ T.matrix.T)
        diffs = np.diff(res.values, axis=1)
        if F.cotype:
            mono = float(np.max(diffs, initial=-np.inf))
            upper = float(np.max(res.values - s[:, None]))
            lower = float(np.max(Tx / F.c - res.values[:, -1]))
            eq = renorm.equivalent_norm_cotype(F, X, N)
            ratio = eq / np.where(s > 0, s, 1)
            eq_gap = float(max(np.max(1 - ratio), np.max(ratio - 2 ** (1 / r))))
        else:
            mono = float(np.max(-diffs, initial=-np.inf))
            upper = float(np.max(res.values - F.c * s[:, None]))
            lower = float(np.max(Tx - res.values[:, -1]))
            eq = None
            eq_gap = None
        checks += [{"check": "monotone_in_depth", "worst": mono, "passed": mono <= 1e-12},
                   {"check": "upper_bound", "worst": upper, "passed": upper <= 1e-9},
                   {"check": "lower_bound", "worst": lower, "passed": lower <= 1e-9}]
        if eq_gap is not None:
            checks.append({"check": "equivalent_norm_bounds", "worst": eq_gap, "passed": eq_gap <= 1e-12})
        n_pairs = _param(params, "n_pairs", 5, int)
        rng = np.random.default_rng([seed, 11])
        Xp, Xm = rng.normal(size=(n_pairs, F.dim)), rng.normal(size=(n_pairs, F.dim))
        if N >= 1:
            mid = renorm.midpoint_arrays(F, Xp, Xm, N - 1)
            w = float(np.max(mid["value"]))
            checks.append({"check": "midpoint", "worst": w, "passed": w <= tol})
        extra = {}
        if F.cotype:
            if N - 1 + 10 <= dyadic.DEPTH_CAP and N >= 1:
                rep = renorm.lemma5_certificate(renorm.GluedBraces(F, N - 1), Xp[0], Xm[0], m=10)
                checks.append({"check": "chain_certificate", "worst": rep.value, "passed": rep.value <= tol})
                extra["chain_certificate"] = rep.to_dict()
        else:
            n_dec = _param(params, "n_dec", 1, int)
            vals, decs = renorm.type_norm_search(F, X, max(N - 1, 0), n_dec,
                                                 budget=_param(params, "budget", 200, int))
            eq = vals
            y_norm = T.codomain(X)
            lo = 2 ** (1 / r - 1) * y_norm
            bgap = float(max(np.max(lo - vals), np.max(vals - y_norm)))
            checks.append({"check": "equivalent_norm_bounds", "worst": bgap, "passed": bgap <= 1e-9})
            if N >= 1:
                step = renorm.smoothness_step_check(F, X[0], Xp[0], decs[0], N - 1)
                checks.append({"check": "smoothness_step", "worst": step.value,
                               "passed": step.value <= tol})
            pad = renorm.padding_identity_check(F, decs[0], 1, max(N - 1, 0))
            checks.append({"check": "padding_identity", "worst": pad.value, "passed": pad.value <= 1e-12})
            extra["decompositions"] = [
                {"y": x.tolist(), "value": float(v), "decomposition": d.to_dict(),
                 "replay": {"type": "decomposition", "functional": F.to_dict(), "depth": max(N - 1, 0),
                            "decomposition": d.to_dict(), "value": float(v)}}
                for x, v, d in zip(X, vals, decs)]
    except renorm.CertificateViolation as exc:
        wit = exc.to_dict()
        wit["replay"] = _brace_replay(F, exc.x, exc.witness, F.objective(exc.x, exc.witness))
        return {"functional": F.to_dict(), "violation": wit, "passed": False}, EXIT_VIOLATION
    points = []
    for i, x in enumerate(X):
        points.append({"x": x.tolist(), "braces": res.values[i].tolist(),
                       "equivalent_norm": None if eq is None else float(eq[i]),
                       "replay": _brace_replay(F, x, res.witnesses[i], F.objective(x, res.witnesses[i]))})
    ok = all(c["passed"] for c in checks)
    cols = ["point"] + [f"N={k}" for k in range(N + 1)] + ["equivalent_norm"]
    rows = [[i] + p["braces"] + [p["equivalent_norm"]] for i, p in enumerate(points)]
    out = {"functional": F.to_dict(), "depth": N, "points": points, "checks": checks,
           "passed": ok, "table": {"columns": cols, "rows": rows}}
    out.update(moduli._jsonable(extra))
    return out, EXIT_PASS if ok else EXIT_FAIL


def cmd_duality(cfg: dict, T: LinearOperator, seed: int, workers: int) -> tuple[dict, int]:
    params = cfg.get("params", {})
    p = _param(params, "p")
    budget = _param(params, "budget", 10_000, int)
    tol = _param(params, "tol", 0.05)
    samples = _param(params, "samples", 100, int)
    try:
        rep = duality.duality_experiment(T, p, budget=budget, seed=seed, workers=workers)
    except DualNotImplemented as exc:
        raise ConfigError(f"missing dual: {exc}") from exc
    except (duality.DualityError, moduli.ExponentError) as exc:
        raise ConfigError(str(exc)) from exc
    rng = np.random.default_rng([seed, 13])
    lam = []
    for _ in range(samples):
        a = rng.uniform(0.1, 2.0)
        lam.append(duality.lambda_balance_check(a, a * rng.uniform(1.01, 3.0), rng.uniform(0.5, 2.0), p).value)
    m = T.codomain.dim
    split = []
    for i in range(samples):
        seq = martingale.random_sequence(seed * 100_003 + i, 3, m)
        g = dyadic.StepFunction(rng.normal(size=(8, m)), T.codomain.dual())
        split.append(duality.pairing_split_check(rng.normal(size=m), seq, g).value)
    ok = rep.relative_gap <= tol and max(lam) <= 1e-10 and max(split) <= 1e-12
    adj = rep.dual
    out = {"report": rep.to_dict(), "lambda_balance_worst": max(lam), "pairing_split_worst": max(split),
           "passed": ok,
           "replay": [_constant_replay(rep.primal, T)["replay"],
                      _constant_replay(adj, adjoint(T))["replay"]],
           "table": {"columns": ["side", "kind", "exponent", "lower_bound"],
                     "rows": [["primal", rep.primal.kind, p, rep.primal.lower_bound],
                              ["dual", adj.kind, dual_index(p), adj.lower_bound]]}}
    return out, EXIT_PASS if ok else EXIT_FAIL


HANDLERS = {"estimate": cmd_estimate, "verify": cmd_verify, "renorm": cmd_renorm, "duality": cmd_duality}


def run(cfg: dict, *, seed: int | None = None, budget: int | None = None, depth: int | None = None,
        tol: float | None = None, workers: int = 1) -> tuple[dict, int]:
    """Run one experiment; returns (report, exit code). Deterministic given the config."""
    cfg = json.loads(json.dumps(cfg))
    params = cfg.setdefault("params", {})
    for key, val in (("budget", budget), ("depth", depth), ("tol", tol)):
        if val is not None:
            params[key] = val
    if seed is not None:
        cfg["seed"] = seed
    seed = int(cfg.get("seed", 0))
    cfg["seed"] = seed
    for key, low in (("budget", 1), ("depth", 0)):
        if key in params and (not isinstance(params[key], int) or params[key] < low):
            raise ConfigError(f"params.{key} must be an integer >= {low}, got {params[key]!r}")
    T = build_operator(cfg)
    try:
        results, code = HANDLERS[cfg["command"]](cfg, T, seed, workers)
    except ConfigError:
        raise
    except ValueError as exc:
        # remaining parameter problems surface from the numerical layer
        raise ConfigError(str(exc)) from exc
    report = {
        "command": cfg["command"],
        "config": cfg,
        "results": moduli._jsonable(results),
        "exit_code": code,
        "versions": {"strongtype": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
    }
    return report, code


# -- output ---------------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(moduli._jsonable(report), indent=2, allow_nan=False) + "\n"
    table = report.get("results", {}).get("table")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if table:
            w.writerow(table["columns"])
            w.writerows([[_fmt(v) for v in row] for row in table["rows"]])
        return buf.getvalue()
    lines = [f"command: {report['command']}", f"seed: {report['config']['seed']}",
             f"exit_code: {report['exit_code']}"]
    res = report["results"]
    for key in ("passed", "violation"):
        if key in res:
            lines.append(f"{key}: {res[key] if key == 'passed' else res[key]['message']}")
    if table:
        cells = [table["columns"]] + [[_fmt(v) for v in row] for row in table["rows"]]
        widths = [max(len(str(r[j])) for r in cells) for j in range(len(cells[0]))]
        lines.append("")
        for r in cells:
            lines.append("  ".join(str(v).rjust(wd) for v, wd in zip(r, widths)))
    return "\n".join(lines) + "\n"


# -- replay -----------------------------------------------------------------------


def _find_replays(obj: Any) -> list:
    found = []
    if isinstance(obj, dict):
        if "type" in obj and "value" in obj and obj.get("type") in ("constant", "brace", "decomposition"):
            return [obj]
        for v in obj.values():
            found += _find_replays(v)
    elif isinstance(obj, list):
        for v in obj:
            found += _find_replays(v)
    return found


def _functional_from_dict(d: dict) -> renorm.BraceFunctional:
    T = LinearOperator.from_dict(d["operator"])
    return renorm.BraceFunctional(d["direction"], T, d["exponent"], d["c"], d["depth_cap"],
                                  d["budget"], d["seed"])


def replay_value(rec: dict) -> float:
    kind = rec["type"]
    if kind == "constant":
        T = LinearOperator.from_dict(rec["operator"])
        return moduli.witness_ratio(rec["kind"], T, rec["exponent"], rec["witness"])[2]
    F = _functional_from_dict(rec["functional"])
    if kind == "brace":
        return F.objective(rec["x"], martingale.DifferenceSequence.from_dict(rec["sequence"]))
    D = renorm.Decomposition.from_dict(rec["decomposition"])
    return renorm.decomposition_objective(F, D, rec["depth"])


def replay(path: str) -> tuple[dict, int]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read witness file: {exc}") from exc
    recs = _find_replays(doc)
    if not recs:
        raise ConfigError("no replayable witnesses in file")
    rows, ok = [], True
    for rec in recs:
        try:
            got = replay_value(rec)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed witness: {exc}") from exc
        want = rec["value"]
        want = float(want) if isinstance(want, str) else want
        if want is None or got == want:
            err = 0.0
        else:
            err = abs(got - want) / max(1.0, abs(want))
        good = bool(err <= REPLAY_TOL) or (np.isinf(got) and got == want)
        ok = ok and bool(good)
        rows.append([rec["type"], want, got, err, bool(good)])
    report = {"command": "replay", "config": {"seed": None, "witness_file": path},
              "results": {"passed": ok, "table": {"columns": ["type", "reported", "replayed", "error", "passed"],
                                                  "rows": rows}},
              "exit_code": EXIT_PASS if ok else EXIT_FAIL}
    return report, report["exit_code"]


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="strongtype", description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", help="experiment config (JSON)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--budget", type=int, help="search budget")
    ap.add_argument("--depth", type=int, help="depth cap")
    ap.add_argument("--tol", type=float, help="tolerance for the checks")
    ap.add_argument("--format", choices=("json", "text", "csv"), default="json")
    ap.add_argument("--output", help="write the report here instead of stdout")
    ap.add_argument("--workers", type=int, default=1, help="search threads (results do not depend on it)")
    ap.add_argument("--replay", metavar="WITNESS_FILE", help="replay every witness in a report")
    ap.add_argument("--timing", action="store_true", help="print wall-clock time to stderr")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        if args.replay:
            report, code = replay(args.replay)
        else:
            if not args.config:
                ap.print_usage(sys.stderr)
                print("strongtype: error: a config file (or --replay) is required", file=sys.stderr)
                return EXIT_CONFIG
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg = load_config(args.config)
            report, code = run(cfg, seed=args.seed, budget=args.budget, depth=args.depth,
                               tol=args.tol, workers=args.workers)
    except ConfigError as exc:
        print(f"strongtype: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = render(report, args.format)
    out = args.output or (None if args.replay else report["config"].get("output"))
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.timing:
        print(f"wall-clock: {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
