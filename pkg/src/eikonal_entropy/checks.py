"""Registry of named acceptance checks.

Every check builds its own synthetic inputs, runs the toolkit at the
stated resolution and compares against a tolerance. ``run`` never
raises on a failed comparison; it returns a :class:`CheckResult`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import besov, entropy as ent, jumpset, kinetic, production as prod, solutions as sol
from .fields import make_grid

COS2 = "cos2s"
SIN2 = "sin2s"


def _cos2():
    return ent.phi_from_psi(ent.trig(cos={2: 1.0}), COS2)


def _sin2():
    return ent.phi_from_psi(ent.trig(sin={2: 1.0}), SIN2)


@dataclass
class CheckResult:
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.summary} ({self.seconds:.1f}s)"

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "summary": self.summary,
                "seconds": self.seconds, "details": self.details}


@dataclass(frozen=True)
class Check:
    name: str
    anchor: str
    tolerance: str
    budget: float  # seconds
    func: Callable[[int], tuple[bool, str, dict]] = field(repr=False)

    def run(self, seed: int = 0) -> CheckResult:
        t = time.perf_counter()
        ok, summary, details = self.func(seed)
        return CheckResult(self.name, bool(ok), summary, details, time.perf_counter() - t)


def _drift(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min() - 1.0)


# ---------------------------------------------------------------------------


def entropy_condition(seed: int) -> tuple[bool, str, dict]:
    gens = [
        ent.trig(cos={2: 1.0}), ent.trig(sin={2: 1.0}), ent.trig(1.0, cos={1: 0.5, 3: 0.2}),
        ent.trig(sin={4: 1.0, 6: -0.3}), ent.trig(0.2, cos={8: 1.0}, sin={1: 0.7}),
        ent.psi0(math.pi / 32, 0.5), ent.psi0(math.pi / 64, 0.5, 0.3),
        ent.psi0(math.pi / 32, 0.25, -1.0), ent.psi0(math.pi / 128, 0.75, 2.0),
        ent.psi0(math.pi / 20, 0.9, 0.5),
    ]
    res = [ent.check_entropy(ent.phi_from_psi(g), 2048).condition for g in gens]
    worst = max(res)
    return worst < 1e-8, f"max residual {worst:.2e} (tol 1e-8)", {"residuals": res}


def chain_rule_vanishing(seed: int):
    C = _cos2()
    tv = {}
    for n in (256, 512):
        g = make_grid(n, n, boundary="bounded")
        tv[n] = prod.production_direct(sol.synth_vortex(g), C).total_variation
    factor = tv[256] / tv[512]
    return factor >= 1.7, f"TV {tv[256]:.3e} -> {tv[512]:.3e}, factor {factor:.3f} (need >= 1.7)", \
        {"tv": {str(k): v for k, v in tv.items()}, "factor": factor}


def jump_formula(seed: int):
    C = _cos2()
    g = make_grid(1024, 1024, boundary="bounded")
    spec = sol.JumpSpec(0.7, 0.3)
    rep = prod.production_direct(sol.synth_jump(g, spec), C)
    v = jumpset.verify_rectifiability(rep.measure, C, [spec])
    ok = 0.98 <= v.ratio <= 1.02
    return ok, f"strip/oracle {v.ratio:.5f} (need [0.98, 1.02]), off-strip {v.off_fraction:.2e}", v.to_json()


def cubic_jump_cost(seed: int):
    C, S = _cos2(), _sin2()
    betas = np.geomspace(0.02, 0.2, 10)
    costs = [prod.jump_cost(C, 0.0, b) for b in betas]
    slope = prod.loglog_slope(betas, costs)
    diag = prod.loglog_slope(betas, [prod.jump_cost(S, 0.0, b) for b in betas])
    ok = math.isfinite(slope) and abs(slope - 3) <= 0.15
    return ok, (f"slope {slope:.3f} (need 3 +- 0.15); max |cost| {max(map(abs, costs)):.1e}; "
                f"sin2s slope {diag:.3f}"), {"betas": betas.tolist(), "costs": costs, "slope": slope,
                                             "sin2s_slope": diag}


def small_jump_bound(seed: int):
    S = _sin2()
    out, ok = {}, True
    for p in (1.0, 2.5):
        tab = prod.small_jump_bound_check(S, [0.4, 0.2, 0.1, 0.05], p, nx=256)
        out[str(p)] = {"ratios": tab.ratios.tolist(), "spread": tab.spread}
        ok &= tab.spread <= 0.5 and not tab.violation
    worst = max(v["spread"] for v in out.values())
    return ok, f"max ratio spread {worst:.3f} (need <= 0.5)", out


def commutator_constants(seed: int):
    g = make_grid(256, 256, boundary="bounded")
    fields = {"laminate": sol.synth_laminate(g, 0.4, 0.3, 0.2, 3),
              "vortex": sol.synth_vortex(g)}
    out, worst = {}, 0.0
    for name, m in fields.items():
        cs = [prod.check_commutator_bounds(m, f"{k}h", seed=seed) for k in (4, 8, 16)]
        d = {c: _drift([getattr(x, c) for x in cs]) for c in ("c1", "c2", "c3")}
        out[name] = {"constants": [[x.c1, x.c2, x.c3] for x in cs], "drift": d}
        worst = max(worst, *d.values())
    return worst <= 0.2, f"max drift {worst:.3f} (need <= 0.2)", out


def _interpolation_family(alpha: float) -> list:
    trigs = ([ent.phi_from_psi(ent.trig(cos={k: 1.0}), f"cos{k}s") for k in (2, 4, 6, 8)]
             + [ent.phi_from_psi(ent.trig(sin={k: 1.0}), f"sin{k}s") for k in (2, 4, 6, 8)])
    bumps = ent.psi0_family(math.pi / 24, alpha).entropies()[::4]
    return prod.normalized_family(trigs + bumps, alpha)


def interpolation(seed: int):
    out, worst = {}, 0.0
    for a in (0.25, 0.5, 0.75):
        fam = _interpolation_family(a)
        p = 2 + a
        Cs = {}
        for n in (512, 1024):
            per = []
            gp = make_grid(n, n)
            gb = make_grid(n, n, boundary="bounded")
            cases = [sol.synth_laminate(gp, 0.0, 0.1, 0.25, 4), sol.synth_laminate(gp, 0.0, 0.3, 0.25, 4),
                     sol.synth_laminate(gb, 0.4, 0.2, 0.2, 3)]
            for m in cases:
                sh = besov.ShiftSet.build(m.grid, rings=3)
                nu = prod.sup_measure(m, fam).total_variation
                sem = besov.besov_seminorm_fd(m, 1 / p, p, sh).value
                per.append(nu / sem ** p)
            Cs[n] = max(per)
        r = max(Cs.values()) / min(Cs.values())
        out[str(a)] = {"C": {str(k): v for k, v in Cs.items()}, "ratio": r, "members": len(fam)}
        worst = max(worst, r)
    return worst <= 2.0, f"max C ratio across nx {worst:.4f} (need <= 2)", out


def sigma_support_sign(seed: int):
    out, ok = {}, True
    ns = 4096
    for b in (0.1, 0.3, 0.7):
        spec = sol.JumpSpec(0.0, b)
        prof = kinetic.sigma_min_jump(spec, ns)
        neg = float(max(0.0, -prof.values.min()))
        outside = float(np.abs(prof.values[~kinetic.support_mask(spec, ns)]).sum() * prof.ds)
        out[str(b)] = {"negativity": neg, "outside_mass": outside, "mass": prof.mass}
        ok &= neg <= 1e-12 and outside <= 1e-8
    wn = max(v["negativity"] for v in out.values())
    wo = max(v["outside_mass"] for v in out.values())
    return ok, f"negativity {wn:.1e} (tol 1e-12), outside mass {wo:.1e} (tol 1e-8)", out


def gbeta_limit(seed: int):
    tests = kinetic.smooth_angular_tests(10, seed)
    betas = [0.2, 0.1, 0.05]
    d = [kinetic.gbeta_pairing_distance(b, tests, 4096) for b in betas]
    slope = prod.loglog_slope(betas, d)
    return abs(slope - 1) <= 0.3, f"slope {slope:.3f} (need 1 +- 0.3)", \
        {"betas": betas, "distances": d, "slope": slope}


def kinetic_consistency(seed: int):
    psi = ent.trig(cos={2: 1.0})
    E = ent.phi_from_psi(psi, COS2)
    g = make_grid(1024, 1024, boundary="bounded")
    m = sol.synth_jump(g, sol.JumpSpec(0.7, 0.3))
    K = kinetic.kinetic_from_jumps(g, m.jumps, 4096)
    D = kinetic.dissipation_from_kinetic(K, psi).total
    P = prod.production_direct(m, E).measure.total
    rel = abs(D - P) / abs(P)
    return rel <= 0.03, f"relative difference {rel:.2e} (need <= 0.03)", \
        {"dissipation": D, "production": P, "relative": rel}


def lp_reconstruction_duality(seed: int):
    rng = np.random.default_rng(seed)
    pairs = [(besov.BandLimited.random(rng), besov.BandLimited.random(rng)) for _ in range(200)]
    alphas, ps = (0.25, 0.5, 0.75), (1.0, 2.0, 3.0)
    best: dict = {}
    rec = 0.0
    for n in (256, 512):
        g = make_grid(n, n)
        b = {}
        for f, h in pairs:
            F, G = f.sample(g), h.sample(g)
            dF, dG = besov.lp_decompose(F), besov.lp_decompose(G)
            rec = max(rec, float(np.abs(dF.reconstruct() - F.values).max() / np.abs(F.values).max()))
            for k, r in besov.duality_sweep(F, G, alphas, ps, dF, dG).items():
                b[k] = max(b.get(k, 0.0), r)
        best[n] = b
    stab = max(max(best[256][k], best[512][k]) / min(best[256][k], best[512][k]) for k in best[256])
    ok = rec < 1e-8 and stab <= 2.0
    return ok, f"reconstruction {rec:.1e} (tol 1e-8), max ratio change {stab:.4f} (need <= 2)", \
        {"reconstruction": rec, "stability": stab,
         "max_ratio": {f"{a},{p}": [best[256][(a, p)], best[512][(a, p)]] for a, p in best[256]}}


def besov_oracle(seed: int):
    g = make_grid(1024, 1024)
    beta, count = 0.3, 4
    m = sol.synth_laminate(g, 0.0, beta, 0.25, count)
    sh = besov.ShiftSet.build(g, rings=3)
    out, worst = {}, 0.0
    for p in (1.0, 2.0, 2.5, 3.0):
        v = besov.besov_seminorm_fd(m, 1 / p, p, sh).value
        o = besov.laminate_seminorm_oracle(beta, count, p)
        out[str(p)] = {"fd": v, "oracle": o}
        worst = max(worst, abs(v / o - 1))
    return worst <= 0.02, f"max relative error {worst:.2e} (tol 0.02)", out


def jump_detection(seed: int):
    C, S = _cos2(), _sin2()
    g = make_grid(1024, 1024, boundary="bounded")
    h = g.h
    m = sol.two_family_laminate(g, 0.05, 0.15)
    nu = prod.sup_measure(m, [C, S]).measure
    rho = [max(abs(prod.jump_cost(C, j.sbar, j.beta)), abs(prod.jump_cost(S, j.sbar, j.beta)))
           for j in m.jumps]
    det = jumpset.detect_jumps(nu, [12 * h, 6 * h, 3 * h], min(rho) / 4)
    pr = jumpset.precision_recall(det.thinned, g, m.jumps, margin=16 * h)
    segs = jumpset.fit_segments(m, det.mask, 16 * h, det.thinned)
    errs = []
    for s in segs:
        near = min(m.jumps, key=lambda j: abs(j.side(*s.trace.x)))
        errs.append(max(jumpset.trace_errors(s.trace, near)))
    terr = max(errs) if errs else math.inf
    ok = pr.precision >= 0.95 and pr.recall >= 0.95 and terr <= 0.02 and len(segs) == len(m.jumps)
    return ok, (f"precision {pr.precision:.3f}, recall {pr.recall:.3f} (need >= 0.95); "
                f"{len(segs)} segments, trace error {terr:.1e} (tol 0.02)"), \
        {"precision": pr.precision, "recall": pr.recall, "segments": len(segs), "trace_errors": errs,
         "tau": min(rho) / 4}


def psi0_uniformity(seed: int):
    norms = []
    for d in (math.pi / 32, math.pi / 64, math.pi / 128):
        fam = ent.psi0_family(d, 0.5)
        norms.append(max(ent.entropy_norm(e, 0.5).c1alpha for e in fam.entropies()))
    growth = max(b / a - 1 for a, b in zip(norms, norms[1:]))
    return growth <= 0.1, f"norms {', '.join(f'{v:.3f}' for v in norms)}; max growth {growth:+.3f} (tol 0.1)", \
        {"norms": norms, "growth": growth}


REGISTRY: dict[str, Check] = {c.name: c for c in [
    Check("entropy-condition", "tangential derivative of Phi_psi vanishes against e^{i theta}",
          "max residual < 1e-8 at N_s = 2048", 1, entropy_condition),
    Check("chain-rule-vanishing", "smooth solutions conserve every entropy (chain rule)",
          "vortex TV factor >= 1.7 from nx 256 to 512", 30, chain_rule_vanishing),
    Check("jump-formula", "rectifiability: div Phi(m) = n.(Phi(m+) - Phi(m-)) H^1 on J_m",
          "strip mass / (cost * length) in [0.98, 1.02] at nx 1024", 60, jump_formula),
    Check("cubic-jump-cost", "jump cost is cubic in the amplitude for small jumps",
          "log-log slope of cos2s cost at sbar 0 equals 3 +- 0.15", 1, cubic_jump_cost),
    Check("small-jump-bound", "small-jump production bound with the B^{1/p}_{p,inf} seminorm",
          "ratio spread <= 50% for p in {1, 2.5}", 300, small_jump_bound),
    Check("commutator-constants", "commutator and mollified-gradient estimates",
          "C1, C2, C3 drift <= 20% over eps in {4h, 8h, 16h}", 120, commutator_constants),
    Check("interpolation-bound", "production bounded by the B^{1/(2+alpha)}_{2+alpha,inf} norm",
          "constant per alpha stable within 2x over nx in {512, 1024}", 600, interpolation),
    Check("sigma-support-sign", "minimal kinetic profile is nonnegative with support near +-pi/2",
          "negativity <= 1e-12, outside mass <= 1e-8 at N_s = 4096", 5, sigma_support_sign),
    Check("gbeta-limit", "g_beta tends to the average of the atoms at +-pi/2",
          "pairing distance slope in beta equals 1 +- 0.3", 5, gbeta_limit),
    Check("kinetic-consistency", "entropy production as a kinetic pairing",
          "relative difference <= 3% at nx 1024, N_s 4096", 120, kinetic_consistency),
    Check("lp-reconstruction-duality", "Besov duality through Littlewood-Paley blocks",
          "reconstruction < 1e-8; max ratio stable within 2x from 256 to 512", 180,
          lp_reconstruction_duality),
    Check("besov-oracle", "piecewise-constant Besov seminorm closed form",
          "within 2% for p in {1, 2, 2.5, 3} at nx 1024", 60, besov_oracle),
    Check("jump-detection", "jump set as the positive-density set of the entropy measure",
          "precision and recall >= 0.95, trace errors <= 0.02 at nx 1024", 120, jump_detection),
    Check("psi0-uniformity", "C^{1,alpha} bound of the psi_0 family is uniform in delta",
          "growth <= 10% per halving of delta at alpha 0.5", 30, psi0_uniformity),
]}


def run_checks(names=None, seed: int = 0) -> list[CheckResult]:
    names = list(REGISTRY) if names is None else list(names)
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise KeyError(f"unknown check: {unknown[0]}")
    return [REGISTRY[n].run(seed) for n in names]


__all__ = ["Check", "CheckResult", "REGISTRY", "run_checks"]
