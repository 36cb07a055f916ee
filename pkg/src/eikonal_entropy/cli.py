"""Command-line front end.

Every subcommand reads an optional scenario JSON and command-line flags
(flags win), runs the stages it names and writes ``report.json``,
``tables.csv`` and plot-data CSVs into the output directory.

Exit codes: 0 when every requested check passes, 1 when a check fails
(the report is still written), 2 on an invalid scenario.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import besov, checks, jumpset, kinetic, production as prod, solutions as sol
from .entropy import entropy_from_json, generator_from_json
from .fields import BOUNDED, PERIODIC, SignedMeasure2, VectorField2, load_field, make_grid, save_field

SCHEMA_VERSION = 1

SCENARIO_KEYS = {
    "field": None,  # free-form generator spec, validated by build_field
    "entropies": None,
    "besov": {"s", "p", "rings", "directions"},
    "production": {"eps", "tests"},
    "kinetic": {"ns", "delta", "psi", "residual"},
    "jumpset": {"radii", "tau", "trace_radius", "measure"},
    "checks": None,
    "out": None,
    "seed": None,
}

FIELD_KINDS = {
    "constant": {"theta"},
    "jump": {"sbar", "beta", "point", "sign"},
    "laminate": {"sbar", "beta", "period", "count", "offset"},
    "two_family": {"beta1", "beta2", "spacing"},
    "vortex": {"center", "core"},
    "distance": {"polygon", "sides", "radius", "center", "phase", "ridge_angle"},
}
GRID_KEYS = {"kind", "nx", "ny", "boundary", "bounds"}

DEFAULT_ENTROPY = {"kind": "trig", "cos": {"2": 1.0}, "name": "cos2s"}

# report.json layout; ``validate_report`` checks documents against it
REPORT_SCHEMA = {
    "schema_version": int,
    "version": str,
    "seed": int,
    "scenario": dict,
    "field": dict,
    "production": list,
    "besov": (dict, type(None)),
    "kinetic": (dict, type(None)),
    "jumpset": (dict, type(None)),
    "checks": list,
    "passed": bool,
}


class ScenarioError(ValueError):
    pass


def validate_report(doc: dict) -> None:
    """Raise ValueError unless ``doc`` has every schema key with the right type."""
    for k, t in REPORT_SCHEMA.items():
        if k not in doc:
            raise ValueError(f"report misses {k!r}")
        if not isinstance(doc[k], t):
            raise ValueError(f"report key {k!r} has type {type(doc[k]).__name__}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ValueError(f"schema version {doc['schema_version']} != {SCHEMA_VERSION}")


def validate_scenario(sc: dict) -> dict:
    if not isinstance(sc, dict):
        raise ScenarioError("scenario must be a JSON object")
    for k, v in sc.items():
        if k not in SCENARIO_KEYS:
            raise ScenarioError(f"unknown key {k!r}")
        allowed = SCENARIO_KEYS[k]
        if allowed is not None:
            if not isinstance(v, dict):
                raise ScenarioError(f"{k!r} must be an object")
            for kk in v:
                if kk not in allowed:
                    raise ScenarioError(f"unknown key {k}.{kk!r}")
    f = sc.get("field")
    if f is not None:
        if isinstance(f, str):
            pass
        elif not isinstance(f, dict):
            raise ScenarioError("'field' must be a file name or an object")
        elif "file" in f:
            extra = set(f) - {"file"}
            if extra:
                raise ScenarioError(f"unknown key field.{sorted(extra)[0]!r}")
        else:
            kind = f.get("kind")
            if kind not in FIELD_KINDS:
                raise ScenarioError(f"unknown field kind {kind!r}")
            for kk in f:
                if kk not in GRID_KEYS | FIELD_KINDS[kind]:
                    raise ScenarioError(f"unknown key field.{kk!r}")
    for c in sc.get("checks", []) or []:
        if c not in checks.REGISTRY:
            raise ScenarioError(f"unknown check {c!r}")
    ents = sc.get("entropies")
    if ents is not None:
        if not isinstance(ents, list):
            raise ScenarioError("'entropies' must be a list")
        for e in ents:
            try:
                generator_from_json(e, 256)
            except (KeyError, TypeError, ValueError) as exc:
                raise ScenarioError(f"bad entropy {e!r}: {exc}") from exc
    return sc


def _jump_from(d: dict) -> sol.JumpSpec:
    return sol.JumpSpec(float(d.get("sbar", 0.7)), float(d.get("beta", 0.3)),
                        tuple(d.get("point", (0.5, 0.5))), int(d.get("sign", 1)))


def build_field(spec) -> VectorField2:
    if isinstance(spec, str):
        spec = {"file": spec}
    if "file" in spec:
        f = load_field(spec["file"])
        if not isinstance(f, VectorField2):
            raise ScenarioError(f"{spec['file']} does not hold a vector field")
        return f
    kind = spec["kind"]
    nx = int(spec.get("nx", 256))
    ny = int(spec.get("ny", nx))
    default_bc = PERIODIC if kind in ("constant", "laminate") else BOUNDED
    g = make_grid(nx, ny, spec.get("bounds", ((0.0, 1.0), (0.0, 1.0))), spec.get("boundary", default_bc))
    if kind == "constant":
        return sol.synth_constant(g, float(spec.get("theta", 0.0)))
    if kind == "jump":
        return sol.synth_jump(g, _jump_from(spec))
    if kind == "laminate":
        return sol.synth_laminate(g, float(spec.get("sbar", 0.0)), float(spec.get("beta", 0.3)),
                                  float(spec.get("period", 0.25)), int(spec.get("count", 4)),
                                  spec.get("offset"))
    if kind == "two_family":
        return sol.two_family_laminate(g, float(spec.get("beta1", 0.05)), float(spec.get("beta2", 0.15)),
                                       float(spec.get("spacing", 0.25)))
    if kind == "vortex":
        return sol.synth_vortex(g, spec.get("center"), float(spec.get("core", 2.0)))
    poly = spec.get("polygon")
    if poly is None:
        poly = sol.regular_polygon(int(spec.get("sides", 5)), tuple(spec.get("center", (0.5, 0.5))),
                                   float(spec.get("radius", 0.35)), float(spec.get("phase", 0.0)))
    return sol.synth_distance_gradient(g, poly, float(spec.get("ridge_angle", 0.3)))


def _entropies(sc: dict) -> list:
    return [entropy_from_json(e) for e in (sc.get("entropies") or [DEFAULT_ENTROPY])]


def _field_summary(m: VectorField2) -> dict:
    return {"grid": m.grid.header(), "meta": dict(m.meta or {}),
            "excluded_cells": int((~m.valid).sum()),
            "jumps": [{"sbar": j.sbar, "beta": j.beta, "point": list(j.point), "sign": j.sign}
                      for j in (m.jumps or ())]}


class Run:
    """Accumulates report sections, table rows and plot files for one invocation."""

    def __init__(self, sc: dict, out: Path, seed: int):
        self.sc = sc
        self.out = out
        self.seed = seed
        self.rows: list[tuple] = []
        self.report = {"schema_version": SCHEMA_VERSION, "version": __version__, "seed": seed,
                       "scenario": sc, "field": {}, "production": [], "besov": None, "kinetic": None,
                       "jumpset": None, "checks": [], "passed": True}
        self._field = None

    @property
    def field(self) -> VectorField2:
        if self._field is None:
            if "field" not in self.sc:
                raise ScenarioError("scenario has no 'field'")
            try:
                self._field = build_field(self.sc["field"])
            except (OSError, ValueError) as exc:
                raise ScenarioError(f"cannot build field: {exc}") from exc
            self.report["field"] = _field_summary(self._field)
        return self._field

    def table(self, section: str, name: str, key: str, value) -> None:
        self.rows.append((section, name, key, value))

    def synth(self) -> None:
        m = self.field
        save_field(self.out / "field", m)
        self.report["field"]["file"] = "field.json"

    def production(self) -> list:
        m = self.field
        cfg = self.sc.get("production", {})
        battery = ()
        if cfg.get("tests"):
            from .fields import smooth_test_battery
            battery = smooth_test_battery(m.grid, int(cfg["tests"]), self.seed)
        reps = []
        for q, E in enumerate(_entropies(self.sc)):
            rep = prod.production_direct(m, E, battery, cfg.get("eps"))
            doc = rep.to_json()
            self.report["production"].append(doc)
            self.table("production", E.name, "total_variation", doc["total_variation"])
            self.table("production", E.name, "total", doc["total"])
            rep.measure.to_csv(self.out / f"production_{q}.csv")
            reps.append((E, rep))
        return reps

    def besov(self) -> None:
        m = self.field
        cfg = self.sc.get("besov", {})
        p = float(cfg.get("p", 2.0))
        s = float(cfg.get("s", 1.0 / p))
        shifts = besov.ShiftSet.build(m.grid, cfg.get("rings"), int(cfg.get("directions", 16)))
        res = besov.besov_seminorm_fd(m, s, p, shifts)
        a = res.argmax
        self.report["besov"] = {"s": s, "p": p, "value": res.value, "rings": shifts.rings,
                                "argmax": {"di": a.di, "dj": a.dj, "length": a.length}}
        self.table("besov", f"s={s:g},p={p:g}", "seminorm", res.value)
        with open(self.out / "besov_profile.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ring", "length", "direction", "value"])
            for ring, ln, d, v in res.profile:
                w.writerow([ring, f"{ln:.17g}", f"{d:.17g}", f"{v:.17g}"])

    def _jump_lines(self) -> tuple[list, list | None]:
        """Analytic jump lines when known, otherwise the detected segments."""
        m = self.field
        if m.jumps:
            return list(m.jumps), None
        js = self.report.get("jumpset") or self.jumpset()
        specs, segs = [], []
        for s in js["_segments"]:
            tr = s.trace
            sbar = tr.sbar
            n = np.array([math.cos(sbar), math.sin(sbar)])
            sign = 1 if tr.normal @ n >= 0 else -1
            specs.append(sol.JumpSpec(sbar, max(tr.beta, 1e-9), tuple(tr.x), sign))
            segs.append((s.p0, s.p1))
        return specs, segs

    def kinetic(self) -> None:
        m = self.field
        cfg = self.sc.get("kinetic", {})
        ns = int(cfg.get("ns", 4096))
        delta = float(cfg.get("delta", 0.2))
        psi_spec = cfg.get("psi", DEFAULT_ENTROPY)
        psi = generator_from_json(psi_spec)
        E = entropy_from_json(psi_spec)
        specs, segs = self._jump_lines()
        K = kinetic.kinetic_from_jumps(m.grid, specs, ns, segs)
        cl = kinetic.classify_structure(K, delta)
        D = kinetic.dissipation_from_kinetic(K, psi)
        P = prod.production_direct(m, E).measure
        doc = {"ns": ns, "delta": delta, "nu_total": K.nu.total, "dissipation_total": D.total,
               "production_total": P.total,
               "relative_difference": abs(D.total - P.total) / abs(P.total) if P.total else None,
               "jm_delta_cells": int(cl.jm_delta.sum()),
               "profiles": [{"tag": sh.tag, "two_beta": sh.two_beta, "sbar": sh.sbar, "sign": sh.sign}
                            for sh in cl.shapes]}
        if cfg.get("residual", False):
            r = kinetic.kinetic_residual(m, K, seed=self.seed)
            doc["residual_max"] = float(r.max(initial=0.0))
        self.report["kinetic"] = doc
        self.table("kinetic", E.name, "dissipation_total", D.total)
        self.table("kinetic", E.name, "production_total", P.total)
        for q, p in enumerate(K.profiles):
            kinetic.profile_csv(self.out / f"kinetic_profile_{q}.csv", K.angles, p)

    def jumpset(self) -> dict:
        m = self.field
        cfg = self.sc.get("jumpset", {})
        g = m.grid
        radii = [float(r) * g.h for r in sorted(cfg.get("radii", (3, 6, 12)), reverse=True)]
        if "measure" in cfg:
            nu = SignedMeasure2.from_csv(cfg["measure"], g).abs()
            excluded = None
        else:
            rep = [prod.production_direct(m, E) for E in _entropies(self.sc)]
            nu = SignedMeasure2(g, np.max([np.abs(r.measure.mass) for r in rep], axis=0),
                                rep[0].measure.margin)
            excluded = rep[0].masked
        tau = cfg.get("tau")
        if tau is None:
            # a quarter of the weakest analytic line density, else of the strongest ratio seen
            if m.jumps:
                tau = 0.25 * min(max(abs(prod.jump_cost(E, j.sbar, j.beta)) for E in _entropies(self.sc))
                                 for j in m.jumps)
            else:
                tau = 0.25 * float(jumpset.density_ratio(nu, radii[-1]).max(initial=0.0)) or 1e-12
        det = jumpset.detect_jumps(nu, radii, float(tau), excluded=excluded)
        r_tr = float(cfg.get("trace_radius", 16)) * g.h
        segs = jumpset.fit_segments(m, det.mask, r_tr, det.thinned)
        doc = {"tau": float(tau), "radii": radii, "detected": int(det.mask.sum()),
               "thinned": int(det.thinned.sum()),
               "segments": [{"p0": s.p0.tolist(), "p1": s.p1.tolist(), "length": s.length,
                             "normal": s.trace.normal.tolist(), "m_plus": s.trace.m_plus.tolist(),
                             "m_minus": s.trace.m_minus.tolist(), "beta": s.trace.beta,
                             "compatibility": s.trace.compatibility} for s in segs]}
        if m.jumps:
            pr = jumpset.precision_recall(det.thinned, g, m.jumps, margin=max(radii))
            doc["precision"], doc["recall"] = pr.precision, pr.recall
            self.table("jumpset", "thinned", "precision", pr.precision)
            self.table("jumpset", "thinned", "recall", pr.recall)
        if segs and "measure" not in cfg:
            E = _entropies(self.sc)[0]
            P = prod.production_direct(m, E).measure
            v = jumpset.verify_rectifiability(P, E, segs)
            doc["rectifiability"] = v.to_json()
            self.table("jumpset", E.name, "strip_ratio", v.ratio)
            self.table("jumpset", E.name, "off_strip_fraction", v.off_fraction)
        for r in det.ratios:
            self.table("jumpset", f"r={r:.6g}", "max_density_ratio", float(det.ratios[r].max()))
        with open(self.out / "detected.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "ratio", "thinned"])
            X, Y = g.centers()
            low = np.minimum.reduce(list(det.ratios.values()))
            for i, j in zip(*np.nonzero(det.mask)):
                w.writerow([f"{X[i, j]:.17g}", f"{Y[i, j]:.17g}", f"{low[i, j]:.17g}", int(det.thinned[i, j])])
        self.report["jumpset"] = doc
        doc["_segments"] = segs
        return doc

    def checks(self, names) -> None:
        for res in checks.run_checks(names, self.seed):
            print(res.line())
            self.report["checks"].append(res.to_json())
            self.table("checks", res.name, "passed", int(res.passed))
            if not res.passed:
                self.report["passed"] = False

    def write(self) -> None:
        doc = copy.copy(self.report)
        if doc.get("jumpset"):
            doc["jumpset"] = {k: v for k, v in doc["jumpset"].items() if not k.startswith("_")}
        validate_report(doc)
        with open(self.out / "report.json", "w") as fh:
            json.dump(doc, fh, indent=1, default=_json_default)
        with open(self.out / "tables.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["section", "name", "key", "value"])
            w.writerows(self.rows)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _parse_radii(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _field_arg(text: str):
    """Inline generator JSON, a generator JSON file, or a saved field."""
    if text.lstrip().startswith("{"):
        return json.loads(text)
    path = text if text.endswith(".json") else text + ".json"
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read field {text!r}: {exc}") from exc
    return doc if "kind" in doc else {"file": text}


def _load_json_arg(text: str):
    if os.path.exists(text):
        with open(text) as fh:
            return json.load(fh)
    return json.loads(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eikonal-entropy", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--out", help="output directory (a .json path puts the report there)")
        p.add_argument("--seed", type=int, help="seed for random test batteries")
        p.add_argument("--threads", type=int, help="FFT workers (EIK_THREADS wins)")
        p.add_argument("--field", help="field file or generator JSON")
        p.add_argument("--entropy", action="append", help="generator JSON (file or inline)")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("synth", help="write a synthetic field"))
    p = common(sub.add_parser("production", help="entropy production measures"))
    p.add_argument("--eps", help='mollification radius, a length or e.g. "4h"')
    p = common(sub.add_parser("besov", help="finite-difference Besov seminorm profile"))
    p.add_argument("--s", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--rings", type=int)
    p = common(sub.add_parser("kinetic", help="minimal kinetic measure of the jump set"))
    p.add_argument("--ns", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--psi", help="generator JSON for the dissipation")
    p = common(sub.add_parser("jumpset", help="detect jumps and extract traces"))
    p.add_argument("--measure", help="CSV of a nonnegative measure (x, y, mass)")
    p.add_argument("--radii", help="radii in cells, e.g. 3,6,12")
    p.add_argument("--tau", type=float)
    p = common(sub.add_parser("verify", help="run the scenario pipeline and acceptance checks"))
    p.add_argument("--check", action="append", help="check name (repeatable; default all)")
    sub.add_parser("list-checks", help="list the named acceptance checks")
    return ap


def _scenario_from_args(args) -> dict:
    sc = {}
    if args.scenario:
        try:
            with open(args.scenario) as fh:
                sc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from exc
        if not isinstance(sc, dict):
            raise ScenarioError("scenario must be a JSON object")
    if args.field:
        sc["field"] = _field_arg(args.field)
    if args.entropy:
        sc["entropies"] = [_load_json_arg(e) for e in args.entropy]
    if args.seed is not None:
        sc["seed"] = args.seed
    cmd = args.command
    if cmd == "production" and args.eps:
        sc.setdefault("production", {})["eps"] = args.eps
    if cmd == "besov":
        for k in ("s", "p", "rings"):
            if getattr(args, k) is not None:
                sc.setdefault("besov", {})[k] = getattr(args, k)
    if cmd == "kinetic":
        for k in ("ns", "delta"):
            if getattr(args, k) is not None:
                sc.setdefault("kinetic", {})[k] = getattr(args, k)
        if args.psi:
            sc.setdefault("kinetic", {})["psi"] = _load_json_arg(args.psi)
    if cmd == "jumpset":
        if args.measure:
            sc.setdefault("jumpset", {})["measure"] = args.measure
        if args.radii:
            sc.setdefault("jumpset", {})["radii"] = _parse_radii(args.radii)
        if args.tau is not None:
            sc.setdefault("jumpset", {})["tau"] = args.tau
    if cmd == "verify" and args.check:
        sc["checks"] = args.check
    return sc


def list_checks(stream=None) -> None:
    stream = stream or sys.stdout
    for c in checks.REGISTRY.values():
        print(f"{c.name}\t{c.anchor}\t{c.tolerance}\t<{c.budget:g}s", file=stream)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-checks":
        list_checks()
        return 0
    if args.threads and not os.environ.get("EIK_THREADS"):
        os.environ["EIK_THREADS"] = str(args.threads)
    try:
        sc = validate_scenario(_scenario_from_args(args))
        out = args.out or sc.get("out") or "."
        out = Path(out)
        if out.suffix == ".json":
            out = out.parent
        out.mkdir(parents=True, exist_ok=True)
        run = Run(sc, out, int(sc.get("seed", 0)))
        cmd = args.command
        if cmd == "synth":
            run.synth()
        elif cmd == "production":
            run.production()
        elif cmd == "besov":
            run.besov()
        elif cmd == "kinetic":
            run.kinetic()
        elif cmd == "jumpset":
            run.jumpset()
        elif cmd == "verify":
            if "field" in sc:
                run.production()
                for stage in ("besov", "kinetic", "jumpset"):
                    if stage in sc:
                        getattr(run, stage)()
            run.checks(sc.get("checks") or list(checks.REGISTRY))
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run.write()
    return 0 if run.report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
