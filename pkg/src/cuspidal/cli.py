"""Command line: stage-wise pipeline with cached intermediate files.

    cuspidal run SCENARIO            all stages listed in the scenario
    cuspidal sweep SCENARIO          sigma_min / cond on an s-grid      -> sweep.csv
    cuspidal scan SCENARIO           poles in (d_k, 2 d_k] + rectangle  -> scan.json
    cuspidal residues SCENARIO       contour residues at the poles      -> residues.json
    cuspidal ms SCENARIO             Maass-Selberg verification         -> ms.csv
    cuspidal classify SCENARIO       image of H^p(X) -> H^p(M)          -> classification.json

SCENARIO is a JSON file or builtin:NAME.  Exit codes: 2 scenario error,
3 non-convergence, 4 invariant violation.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import (BranchError, ConvergenceError, CuspidalError, InvariantViolation,
                     PoleProximity, ScenarioError)
from .hodge import classification_report, classifier_from_dict, classifier_from_pipeline
from .msrel import MSResult, ms_grid, write_ms_csv
from .residues import contour_residue, pole_scan, rectangle_sweep, residue_invariants, residue_pairing_check
from .scatter import middle_unitarity_defect, solve_batch
from .scenarios import BUILTIN_NAMES, builtin, load_scenario, parse_bundle

CHUNK = 32   # fixed work unit, independent of the thread count
TOL = {"hermitian": 1e-9, "min_eig": -1e-10, "order": 1e-7, "leak": 1e-8, "pairing": 1e-6, "ms": 1e-6}


def _fmt(x):
    return "%.17g" % x


def _threads(n):
    if n is not None:
        return max(1, n)
    env = os.environ.get("CUSPIDAL_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ScenarioError(f"CUSPIDAL_THREADS must be an integer, got {env!r}")


def _load(spec, k=None):
    sf = builtin(spec.split(":", 1)[1]) if spec.startswith("builtin:") else load_scenario(spec)
    if k is not None:
        sf.doc["incoming"]["k"] = int(k)
        sf.__post_init__()
    return sf


def _sha(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_meta(out, stage, sf, path, extra=None):
    meta = {"stage": stage, "scenario": sf.digest(), "hash": _sha(path)}
    meta.update(extra or {})
    with open(os.path.join(out, f"{stage}.meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return meta


def _read_meta(out, stage, sf, needed_by):
    path = os.path.join(out, f"{stage}.meta.json")
    if not os.path.exists(path):
        raise ScenarioError(f"{needed_by} needs the {stage} cache in {out}; run `cuspidal {stage}` with the same --out first")
    with open(path) as fh:
        meta = json.load(fh)
    data = os.path.join(out, meta.get("file", ""))
    if meta.get("scenario") != sf.digest():
        raise ScenarioError(f"the {stage} cache in {out} belongs to a different scenario; rerun `cuspidal {stage}`")
    if not os.path.exists(data) or _sha(data) != meta.get("hash"):
        raise ScenarioError(f"the {stage} cache file {data} is missing or was modified; rerun `cuspidal {stage}`")
    return meta


def parse_grid(text):
    """a:b:n with real or complex endpoints, e.g. 0.5:1.2:50 or 0.6-0.1j:0.6+0.1j:21."""
    try:
        a, b, n = text.split(":")
        a, b, n = complex(a.replace(" ", "")), complex(b.replace(" ", "")), int(n)
    except ValueError as exc:
        raise ScenarioError(f"--s-grid must look like a:b:n, got {text!r}") from exc
    if n < 2:
        raise ScenarioError("--s-grid needs at least 2 points")
    return a, b, n


def default_grid(scn):
    if scn.d > 0:
        return complex(scn.d * (1 + 1e-3)), complex(2 * scn.d), scn.numerics.scan_points
    return 0.05 + 0j, 1.0 + 0j, scn.numerics.scan_points


def sigma_on(scn, s_values, threads):
    """Normalized sigma_min and cond per point; fixed chunking keeps results thread-independent."""
    chunks = [s_values[i:i + CHUNK] for i in range(0, len(s_values), CHUNK)]

    def work(chunk):
        res = solve_batch(scn, [scn.point(s) for s in chunk], allow_pole=True)
        return [(r.sigma_min, r.cond) for r in res]

    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(work, chunks))
    flat = [x for part in parts for x in part]
    return np.array([x[0] for x in flat]), np.array([x[1] for x in flat])


# --- stages ----------------------------------------------------------------------------------

def stage_sweep(sf, out, threads, grid=None):
    scn = sf.scenario()
    a, b, n = grid or default_grid(scn)
    s = np.linspace(a, b, n)
    sig, cond = sigma_on(scn, s, threads)
    path = os.path.join(out, "sweep.csv")
    with open(path, "w") as fh:
        fh.write("s_re,s_im,sigma_min,cond\n")
        for z, sg, c in zip(s, sig, cond):
            fh.write(",".join(_fmt(v) for v in (z.real, z.imag, sg, c)) + "\n")
    _write_meta(out, "sweep", sf, path, {"file": "sweep.csv", "grid": [_fmt(a.real), _fmt(a.imag), _fmt(b.real), _fmt(b.imag), n]})
    return {"points": n, "min_sigma": float(sig.min())}


def _read_sweep(out, sf, scn):
    meta = _read_meta(out, "sweep", sf, "scan")
    a, b, n = default_grid(scn)
    want = [_fmt(a.real), _fmt(a.imag), _fmt(b.real), _fmt(b.imag), n]
    if meta.get("grid") != want:
        raise ScenarioError("the sweep cache does not hold the real scan grid; rerun `cuspidal sweep` without --s-grid")
    rows = np.loadtxt(os.path.join(out, "sweep.csv"), delimiter=",", skiprows=1, ndmin=2)
    return rows[:, 0], rows[:, 2]


def stage_scan(sf, out, threads):
    scn = sf.scenario()
    grid, sigma = _read_sweep(out, sf, scn)
    report = {"d": scn.d, "poles": [], "sigmaAtPoles": [], "unresolved": []}
    if scn.d > 0:
        res = pole_scan(scn, grid=grid, sigma=sigma)
        report.update(poles=res.poles, sigmaAtPoles=res.sigma_at_poles,
                      unresolved=[list(u) for u in res.unresolved], removable=res.removable,
                      thresholdAdjacent=[list(u) for u in res.threshold_adjacent])
        floor, where = rectangle_sweep(scn)
        report["rectangle"] = {"minSigma": floor, "at": [where.real, where.imag],
                               "floor": scn.numerics.sigma_floor, "ok": floor >= scn.numerics.sigma_floor}
    path = os.path.join(out, "scan.json")
    _dump(path, report)
    _write_meta(out, "scan", sf, path, {"file": "scan.json"})
    failures = []
    if report.get("rectangle") and not report["rectangle"]["ok"]:
        failures.append(("pole confinement", f"sigma_min {floor:.2e} below floor off the real axis"))
    return report, failures


def _read_scan(out, sf, who):
    _read_meta(out, "scan", sf, who)
    with open(os.path.join(out, "scan.json")) as fh:
        return json.load(fh)


def stage_residues(sf, out, threads, rho=None):
    scn = sf.scenario()
    scan = _read_scan(out, sf, "residues")
    poles = scan["poles"]
    entries, failures = [], []
    basis = np.eye(scn.m)
    for s0 in poles:
        rd = contour_residue(scn, s0, rho=rho, others=poles)
        inv = residue_invariants(rd)
        nrm = max(inv["norm"], 1e-300)
        pair = [[residue_pairing_check(scn, rd, basis[i], basis[j]) for j in range(scn.m)] for i in range(scn.m)]
        worst = float(np.max(pair))
        checks = {
            "hermitian": inv["hermitian_defect"] <= TOL["hermitian"] * nrm or nrm <= 1e-10,
            "psd": inv["min_eig"] >= TOL["min_eig"],
            "order": rd.order_certificate <= TOL["order"],
            "leak": rd.open_channel_leak <= TOL["leak"],
            "pairing": worst <= TOL["pairing"] * (1 + inv["norm"]),
        }
        failures += [(f"residue {name}", f"s0 = {s0:.12g}") for name, ok in checks.items() if not ok]
        entries.append({
            "s0": s0, "rho": rd.rho, "loops": rd.loops,
            "blocks": [{"l": bid, "matrix": _mat(rd.C_full[sl])} for bid, sl in rd.blocks],
            "orderCertificate": rd.order_certificate, "leak": rd.open_channel_leak,
            "pairingDefects": pair, "hermitianDefect": inv["hermitian_defect"], "minEig": inv["min_eig"],
            "checks": checks})
    path = os.path.join(out, "residues.json")
    _dump(path, {"residues": entries})
    _write_meta(out, "residues", sf, path, {"file": "residues.json"})
    return {"poles": len(entries)}, failures


def stage_ms(sf, out, threads, taus=None, rs=None):
    scn = sf.scenario()
    scan = _read_scan(out, sf, "ms")
    taus = taus or sf.ms_taus
    rs = rs or sf.ms_rs
    phi = sf.phi(scn)

    def work(tau):
        try:
            return ms_grid(scn, [tau], rs, phi, poles=scan["poles"])
        except PoleProximity:
            return [MSResult(tau, r, float("nan"), float("nan"), float("nan"), float("nan")) for r in rs]

    with ThreadPoolExecutor(max_workers=threads) as ex:
        results = [m for part in ex.map(work, taus) for m in part]
    path = os.path.join(out, "ms.csv")
    write_ms_csv(path, results)
    _write_meta(out, "ms", sf, path, {"file": "ms.csv"})
    done = [m.rel_error for m in results if m.rel_error == m.rel_error]
    worst = max(done) if done else 0.0
    failures = [("Maass-Selberg", f"relative error {worst:.2e}")] if worst > TOL["ms"] else []
    summary = {"rows": len(results), "refused": len(results) - len(done), "maxRelError": worst}
    if 2 * scn.k == scn.bundle.f:
        # informational only: no unitarity statement is available to assert
        summary["unitarityDefect"] = max(middle_unitarity_defect(scn, t) for t in taus)
    return summary, failures


def stage_classify(sf, out, threads, matrices=None):
    if matrices:
        with open(matrices) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"{matrices}: malformed JSON ({exc})") from exc
        if "bundle" in doc:
            bundle = parse_bundle(doc["bundle"])
        elif sf is not None:
            bundle = sf.bundle
        else:
            raise ScenarioError(f"{matrices} has no bundle and no scenario was given")
        inp = classifier_from_dict(bundle, doc)
    else:
        if not sf.model_factory_ok():
            raise ScenarioError("classification rebuilds the model at every degree; use a vertex mode or a "
                                "degree-free potential (zero, smooth-random, channel-constant)")
        inp = classifier_from_pipeline(sf.bundle, sf.model_for, sf.numerics)
    report = classification_report(inp)
    path = os.path.join(out, "classification.json")
    _dump(path, report)
    return {"dimAp": [d["dimAp"] for d in report["degrees"]]}, []


def _mat(m):
    m = np.atleast_2d(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)


# --- entry point -------------------------------------------------------------------------------

def run_stages(sf, out, threads, stages, args=None):
    os.makedirs(out, exist_ok=True)
    summary, failures = {}, []
    get = (lambda name: getattr(args, name, None)) if args is not None else (lambda name: None)
    for stage in stages:
        if stage == "sweep":
            summary["sweep"] = stage_sweep(sf, out, threads, get("s_grid"))
            continue
        if stage == "scan":
            res, fail = stage_scan(sf, out, threads)
        elif stage == "residues":
            res, fail = stage_residues(sf, out, threads, get("contour_radius"))
        elif stage == "ms":
            res, fail = stage_ms(sf, out, threads, get("tau"), get("r"))
        else:
            res, fail = stage_classify(sf, out, threads, get("from_matrices"))
        summary[stage] = res if stage != "scan" else {"poles": res["poles"], "unresolved": res["unresolved"]}
        failures += fail
    return summary, failures


def build_parser():
    p = argparse.ArgumentParser(prog="cuspidal", description="Fibered-cusp scattering laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "scan", "residues", "ms", "classify"):
        sp = sub.add_parser(name)
        sp.add_argument("scenario", nargs="?" if name == "classify" else None,
                        help=f"scenario JSON or builtin:NAME ({', '.join(BUILTIN_NAMES)})")
        sp.add_argument("--out", default="cuspidal-out")
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--k", type=int, default=None, help="override the incoming fiber degree")
        if name in ("sweep", "run"):
            sp.add_argument("--s-grid", type=parse_grid, default=None)
        if name in ("residues", "run"):
            sp.add_argument("--contour-radius", type=float, default=None)
        if name in ("ms", "run"):
            sp.add_argument("--tau", type=float, nargs="+", default=None)
            sp.add_argument("--r", type=float, nargs="+", default=None)
        if name == "classify":
            sp.add_argument("--from-matrices", default=None)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        threads = _threads(args.threads)
        if args.command == "classify" and args.scenario is None:
            if not args.from_matrices:
                raise ScenarioError("classify needs a scenario or --from-matrices")
            os.makedirs(args.out, exist_ok=True)
            res, _ = stage_classify(None, args.out, threads, args.from_matrices)
            print(json.dumps(res))
            return 0
        sf = _load(args.scenario, args.k)
        stages = sf.stages if args.command == "run" else [args.command]
        summary, failures = run_stages(sf, args.out, threads, stages, args)
        summary["failures"] = [f"{n}: {d}" for n, d in failures]
        _dump(os.path.join(args.out, f"{args.command}.summary.json"), summary)
        print(json.dumps(summary, default=float))
        if failures:
            raise InvariantViolation(*failures[0])
        return 0
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, PoleProximity, BranchError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 4
    except CuspidalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
