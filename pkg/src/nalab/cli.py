"""Batch experiment runner: ``nalab <subcommand> --config cfg.json --out DIR``.

Each run reads one JSON config, validates it against the subcommand's
schema (unknown keys are rejected), writes CSV/JSON artifacts tagged with
the sha256 of the canonical config, and prints a one-line summary.
Exit status: 0 success, 1 numeric failure, 2 usage or schema error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import flows, lattice, measures
from .lattice import LatticeFunction, LatticeSpec
from .padic import Ball, DomainError, PAdic, PMatrix

# ---------------------------------------------------------------------------
# schemas

PADIC = {"type": ["integer", "string"], "pattern": r"^-?\d+(/-?\d+)?$"}
FILE_REF = {"type": "object", "properties": {"file": {"type": "string"}},
            "required": ["file"], "additionalProperties": False}
BALL_ROW = {
    "type": "object",
    "properties": {"center": PADIC, "radius_exp": {"type": "integer"},
                   "weight": {"type": "number", "exclusiveMinimum": 0},
                   "eta": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1}},
    "required": ["center", "radius_exp"], "additionalProperties": False,
}
QGAUSS = {
    "type": "object",
    "properties": {"type": {"const": "qgauss"}, "beta": {"type": "number", "exclusiveMinimum": 0},
                   "q": {"type": "number", "exclusiveMinimum": 0}, "gamma": PADIC,
                   "support": {"type": "integer"}},
    "required": ["type", "beta", "q"], "additionalProperties": False,
}
SECOND = {
    "type": "object",
    "properties": {"type": {"const": "second_type"},
                   "balls": {"type": "array", "minItems": 1, "items": BALL_ROW},
                   "perturbation": {"type": "array", "items": BALL_ROW}},
    "required": ["type", "balls"], "additionalProperties": False,
}
MEASURE = {"oneOf": [QGAUSS, SECOND, FILE_REF]}
LATTICE = {"type": "object", "properties": {"m": {"type": "integer"}, "n": {"type": "integer"}},
           "required": ["m", "n"], "additionalProperties": False}
PRODUCT = {
    "type": "object",
    "properties": {"K": {"type": "integer", "minimum": 1}, "factor": MEASURE,
                   "factors": {"type": "array", "items": MEASURE},
                   "scales": {"type": "array", "items": PADIC}, "scale_ratio": PADIC},
    "required": ["K"], "additionalProperties": False,
}
PRODUCT_REF = {"oneOf": [PRODUCT, FILE_REF]}
FUNCTION = {
    "oneOf": [
        {"type": "object", "properties": {"kind": {"const": "indicator"}, "radius_exp": {"type": "integer"}},
         "required": ["kind", "radius_exp"], "additionalProperties": False},
        {"type": "object", "properties": {"kind": {"const": "random"}, "mean_zero": {"type": "boolean"}},
         "required": ["kind"], "additionalProperties": False},
        {"type": "object", "properties": {"kind": {"const": "file"}, "path": {"type": "string"}},
         "required": ["kind", "path"], "additionalProperties": False},
        {"type": "object", "properties": {"kind": {"const": "values"},
                                          "values": {"type": "array", "items": {"type": "number"}}},
         "required": ["kind", "values"], "additionalProperties": False},
    ]
}
MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}}
VECTOR = {"type": "array", "items": PADIC}
SHIFT = {"oneOf": [VECTOR, {"type": "object",
                            "properties": {"constant": PADIC, "scaled": {"type": "boolean"}},
                            "required": ["constant"], "additionalProperties": False}]}
CYLINDER = {"type": "array", "minItems": 1, "items": {
    "type": "object", "properties": {"k": {"type": "integer", "minimum": 0}, "center": PADIC,
                                     "radius_exp": {"type": "integer"}},
    "required": ["k", "center", "radius_exp"], "additionalProperties": False}}
FLOW = {
    "type": "object",
    "properties": {"d": {"type": "integer", "minimum": 1}, "drift": MATRIX,
                   "diffusion": {"type": "array", "items": MATRIX}, "start": MATRIX},
    "required": ["d", "drift", "diffusion"], "additionalProperties": False,
}
NOISE = {
    "type": "object",
    "properties": {"measure": MEASURE, "R": {"type": "integer"}, "level": {"type": "integer", "minimum": 0},
                   "scaling": VECTOR},
    "required": ["measure", "level", "scaling"], "additionalProperties": False,
}

COMMON = {
    "subcommand": {"type": "string"},
    "p": {"type": "integer", "minimum": 2},
    "precision": {"type": "integer", "minimum": 1},
    "seed": {"type": "integer", "minimum": 0},
    "tolerance": {"type": "number", "exclusiveMinimum": 0},
    "outputs": {"type": "object", "additionalProperties": {"type": "string"}},
}


def _schema(required, **props):
    return {"type": "object", "properties": {**COMMON, **props},
            "required": ["p", *required], "additionalProperties": False}


SCHEMAS = {
    "density": _schema(["measure"], measure=MEASURE, lattice=LATTICE),
    "fourier": _schema(["lattice", "function"], lattice=LATTICE, function=FUNCTION),
    "vladimirov": _schema(["lattice", "function", "b"], lattice=LATTICE, function=FUNCTION,
                          b={"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}}),
    "pd": _schema(["lattice", "function", "b"], lattice=LATTICE, function=FUNCTION,
                  b={"type": "number", "minimum": 0},
                  points={"type": "array", "items": {"type": "integer", "minimum": 0}}),
    "riesz": _schema(["n", "q", "y", "cutoff"], n={"type": "integer", "minimum": 1},
                     q={"type": "number", "exclusiveMinimum": 0}, y=PADIC,
                     cutoff={"type": "integer", "minimum": 1}),
    "kakutani": _schema(["product", "shift"], product=PRODUCT_REF, shift=SHIFT,
                        K={"type": "integer", "minimum": 1}),
    "quasiinv": _schema(["product"], product=PRODUCT_REF, n_triples={"type": "integer", "minimum": 1},
                        K={"type": "integer", "minimum": 1}),
    "pdmeasure": _schema(["product", "direction", "cylinder", "b"], product=PRODUCT_REF, direction=SHIFT,
                         cylinder=CYLINDER,
                         b={"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                         refinements={"type": "integer", "minimum": 0}),
    "simulate": _schema(["flow", "noise"], flow=FLOW, noise=NOISE,
                        n_paths={"type": "integer", "minimum": 1}),
    "histogram": _schema(["flow", "noise", "m_q"], flow=FLOW, noise=NOISE,
                         m_q={"type": "integer", "minimum": 1},
                         n_samples={"type": "integer", "minimum": 1}),
    "regrep": _schema(["product", "h"], product=PRODUCT_REF, h=SHIFT,
                      n_samples={"type": "integer", "minimum": 2},
                      K={"type": "integer", "minimum": 1},
                      test_ball={"type": "object", "properties": {"center": PADIC, "radius_exp": {"type": "integer"}},
                                 "required": ["center", "radius_exp"], "additionalProperties": False}),
    "picard": _schema(["coefficients", "x0", "noise"], x0=PADIC, noise=NOISE,
                      coefficients={"type": "array", "items": {
                          "type": "object", "properties": {"k": {"type": "integer", "minimum": 0},
                                                           "l": {"type": "integer", "minimum": 0},
                                                           "const": PADIC, "slope": PADIC},
                          "required": ["k", "l"], "additionalProperties": False}},
                      n_iter={"type": "integer", "minimum": 1}),
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config helpers


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _resolve_refs(obj, base: Path):
    """Inline every {"file": path} object (paths relative to the config)."""
    if isinstance(obj, dict):
        if set(obj) == {"file"}:
            path = (base / obj["file"]) if not Path(obj["file"]).is_absolute() else Path(obj["file"])
            try:
                loaded = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as err:
                raise UsageError(f"cannot read referenced spec {path}: {err}") from err
            return _resolve_refs(loaded, path.parent)
        return {k: _resolve_refs(v, base) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_resolve_refs(v, base) for v in obj]
    return obj


def load_config(path: Path, subcommand: str) -> dict:
    try:
        cfg = json.loads(path.read_text())
    except OSError as err:
        raise UsageError(f"cannot read config: {err}") from err
    except json.JSONDecodeError as err:
        raise UsageError(f"config is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    if cfg.get("subcommand", subcommand) != subcommand:
        raise UsageError(f"config is for {cfg['subcommand']!r}, not {subcommand!r}")
    cfg = _resolve_refs(cfg, path.parent)
    try:
        jsonschema.validate(cfg, SCHEMAS[subcommand])
    except jsonschema.ValidationError as err:
        loc = "/".join(map(str, err.absolute_path)) or "<root>"
        raise UsageError(f"config error at {loc}: {err.message}") from None
    return cfg


class Context:
    def __init__(self, cfg: dict, out: Path, threads: int, tolerance: float | None):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.tolerance = tolerance if tolerance is not None else cfg.get("tolerance")
        self.p = int(cfg["p"])
        self.prec = int(cfg.get("precision", 20))
        self.seed = int(cfg.get("seed", 0))
        self.hash = config_hash(cfg)
        self.failures: list[str] = []

    def padic(self, v) -> PAdic:
        return PAdic.from_value(v, self.p, self.prec)

    def path(self, key: str, default: str) -> Path:
        name = self.cfg.get("outputs", {}).get(key, default)
        return self.out / name

    def write_csv(self, key: str, default: str, header, rows) -> Path:
        path = self.path(key, default)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([*header, "config_hash"])
            for r in rows:
                w.writerow([*map(_cell, r), self.hash])
        return path

    def write_json(self, key: str, default: str, results) -> Path:
        path = self.path(key, default)
        path.write_text(json.dumps({"config_hash": self.hash, "results": results},
                                   sort_keys=True, indent=2, default=_jsonable) + "\n")
        return path

    def check(self, name: str, error: float) -> bool:
        ok = self.tolerance is None or error <= self.tolerance
        if not ok:
            self.failures.append(f"{name}: error {error:.3g} exceeds tolerance {self.tolerance:g}")
        return ok


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, PAdic):
        return str(v.to_fraction())
    raise TypeError(type(v).__name__)


def _measure(ctx: Context, obj):
    return measures.measure_from_dict(obj, ctx.p, ctx.prec)


def _product(ctx: Context, obj):
    return measures.product_from_dict(obj, ctx.p, ctx.prec)


def _lattice(ctx: Context) -> LatticeSpec:
    lat = ctx.cfg["lattice"]
    return LatticeSpec(ctx.p, int(lat["m"]), int(lat["n"]))


def _function(ctx: Context, spec: LatticeSpec) -> LatticeFunction:
    f = ctx.cfg["function"]
    kind = f["kind"]
    if kind == "indicator":
        return LatticeFunction.indicator_ball(spec, int(f["radius_exp"]))
    if kind == "random":
        rng = np.random.Generator(np.random.PCG64(ctx.seed))
        return lattice.random_lattice_function(spec, rng, bool(f.get("mean_zero", False)))
    if kind == "file":
        g = lattice.load_lattice_function(Path(f["path"]))
        if g.spec != spec:
            raise UsageError(f"function file is on {g.spec}, config says {spec}")
        return g
    vals = np.asarray(f["values"], dtype=complex)
    if vals.shape != (spec.size,):
        raise UsageError(f"expected {spec.size} values, got {len(vals)}")
    return LatticeFunction(spec, vals)


def _shift(ctx: Context, obj, prod) -> list:
    if isinstance(obj, list):
        z = [ctx.padic(v) for v in obj]
        if len(z) < prod.K:
            raise UsageError("shift vector shorter than K")
        return z
    c = ctx.padic(obj["constant"])
    if obj.get("scaled", True):
        return [c * v for v in prod.scales]
    return [c] * prod.K


def _matrix(ctx: Context, rows) -> PMatrix:
    return PMatrix(ctx.p, ctx.prec, tuple(tuple(r) for r in rows))


def _flow(ctx: Context) -> flows.GroupFlowSpec:
    f = ctx.cfg["flow"]
    d = int(f["d"])
    start = _matrix(ctx, f["start"]) if "start" in f else PMatrix.identity(d, ctx.p, ctx.prec)
    return flows.GroupFlowSpec(ctx.p, d, _matrix(ctx, f["drift"]),
                               tuple(_matrix(ctx, E) for E in f["diffusion"]), start, ctx.prec)


def _noise_model(ctx: Context) -> flows.NoiseModel:
    n = ctx.cfg["noise"]
    lat = flows.TimeLattice(ctx.p, int(n.get("R", 0)), int(n["level"]))
    return flows.NoiseModel(_measure(ctx, n["measure"]), lat, tuple(ctx.padic(v) for v in n["scaling"]))


# ---------------------------------------------------------------------------
# subcommands; each returns a one-line summary


def cmd_density(ctx: Context) -> str:
    spec = _measure(ctx, ctx.cfg["measure"])
    lat = _lattice(ctx) if "lattice" in ctx.cfg else spec.default_lattice()
    masses = spec.cell_masses(lat)
    rows = []
    for i in range(lat.size):
        x = lat.point(i, ctx.prec)
        rows.append((i, str(x.to_fraction()), spec.density(x), masses[i]))
    ctx.write_csv("table", "density.csv", ["digit_index", "x", "density", "cell_mass"], rows)
    total = float(masses.sum())
    quad = float(sum(r[2] for r in rows) * lat.cell_measure)
    ctx.write_json("summary", "density.json", {"lattice": [lat.p, lat.m, lat.n], "total_mass": total,
                                               "quadrature_integral": quad})
    ctx.check("integral", abs(quad - 1.0))
    return f"density: {lat.size} cells, cell mass total {total:.12g}, quadrature {quad:.12g}"


def cmd_fourier(ctx: Context) -> str:
    spec = _lattice(ctx)
    f = _function(ctx, spec)
    F = lattice.fourier(f)
    ctx.write_csv("transform", "fourier.csv", ["digit_index", "real", "imag"],
                  [(i, v.real, v.imag) for i, v in enumerate(F.values)])
    n2 = lattice.inner_product(f, f).real
    parseval = abs(lattice.inner_product(F, F).real - n2) / max(n2, 1e-300)
    refl = float(np.max(np.abs(lattice.fourier(F).values - f.reflect().values), initial=0.0))
    ctx.write_json("summary", "fourier.json", {"lattice": [spec.p, spec.m, spec.n],
                                               "parseval_rel_error": parseval, "reflection_error": refl})
    ctx.check("parseval", parseval)
    ctx.check("reflection", refl)
    return f"fourier: size {spec.size}, parseval rel err {parseval:.3g}, reflection err {refl:.3g}"


def cmd_vladimirov(ctx: Context) -> str:
    spec = _lattice(ctx)
    f = _function(ctx, spec)
    rows, res = [], {}
    for b in ctx.cfg["b"]:
        mult = lattice.vladimirov_multiplier(f, b)
        ker = lattice.vladimirov_kernel(f, b)
        err = float(np.max(np.abs(mult.values - ker.values)))
        res[str(b)] = {"max_abs_difference": err}
        ctx.check(f"b={b}", err)
        for i in range(spec.size):
            rows.append((b, i, mult.values[i].real, mult.values[i].imag, ker.values[i].real, ker.values[i].imag))
    ctx.write_csv("table", "vladimirov.csv",
                  ["b", "digit_index", "multiplier_real", "multiplier_imag", "kernel_real", "kernel_imag"], rows)
    ctx.write_json("summary", "vladimirov.json", res)
    worst = max(v["max_abs_difference"] for v in res.values())
    return f"vladimirov: {len(res)} orders, max multiplier/kernel difference {worst:.3g}"


def cmd_pd(ctx: Context) -> str:
    spec = _lattice(ctx)
    f = _function(ctx, spec)
    b = float(ctx.cfg["b"])
    pts = ctx.cfg.get("points", list(range(spec.size)))
    rows = []
    for i in pts:
        full = lattice.pd_kernel(f, b, i) if b > 0 else complex("nan")
        unit = lattice.pd_c(f, b, i)
        rows.append((i, full.real, full.imag, unit.real, unit.imag))
    ctx.write_csv("table", "pd.csv", ["digit_index", "pd_real", "pd_imag", "pd_c_real", "pd_c_imag"], rows)
    ctx.write_json("summary", "pd.json", {"b": b, "points": len(rows)})
    return f"pd: b={b}, {len(rows)} points"


def cmd_riesz(ctx: Context) -> str:
    c = ctx.cfg
    y = ctx.padic(c["y"])
    r = lattice.riesz_integral_check(int(c["n"]), float(c["q"]), y, int(c["cutoff"]))
    row = (ctx.p, c["n"], c["q"], y.norm, c["cutoff"], r.lattice_value, r.closed_form, r.error, r.tail_bound)
    ctx.write_csv("table", "riesz.csv", ["p", "n", "q", "y_norm", "cutoff", "lattice", "closed_form",
                                         "abs_error", "tail_bound"], [row])
    ctx.write_json("summary", "riesz.json", {"lattice": r.lattice_value, "closed_form": r.closed_form,
                                             "abs_error": r.error, "tail_bound": r.tail_bound})
    ctx.check("riesz", r.error)
    return f"riesz: lattice {r.lattice_value:.9g} closed form {r.closed_form:.9g} |diff| {r.error:.3g}"


def cmd_kakutani(ctx: Context) -> str:
    prod = _product(ctx, ctx.cfg["product"])
    z = _shift(ctx, ctx.cfg["shift"], prod)
    rep = measures.kakutani_dichotomy(prod, z, ctx.cfg.get("K"))
    ctx.write_csv("table", "kakutani.csv", ["k", "alpha", "partial_product"], rep.rows())
    ctx.write_json("verdict", "kakutani.json", {"verdict": rep.verdict, "K": rep.K, "policy": rep.policy,
                                                "final_product": rep.partial_products[-1],
                                                "absolute_continuity_violations": list(rep.violations)})
    return f"kakutani: K={rep.K}, product {rep.partial_products[-1]:.6g}, verdict {rep.verdict}"


def cmd_quasiinv(ctx: Context) -> str:
    prod = _product(ctx, ctx.cfg["product"])
    K = ctx.cfg.get("K", prod.K)
    n = int(ctx.cfg.get("n_triples", 100))
    pts = measures.sample_product(prod, 3 * n, ctx.seed, ctx.prec)
    rows = []
    worst = 0.0
    for j in range(n):
        x, z, h = pts[3 * j], pts[3 * j + 1], pts[3 * j + 2]
        rho = measures.quasi_invariance_factor(prod, z, x, K)
        res = measures.cocycle_residual(prod, z, h, x, K)
        worst = max(worst, res)
        rows.append((j, rho, res))
    ctx.write_csv("table", "quasiinv.csv", ["triple", "rho_z_x", "cocycle_residual"], rows)
    ctx.write_json("summary", "quasiinv.json", {"triples": n, "max_residual": worst})
    ctx.check("cocycle", worst)
    return f"quasiinv: {n} triples, max cocycle residual {worst:.3g}"


def cmd_pdmeasure(ctx: Context) -> str:
    prod = _product(ctx, ctx.cfg["product"])
    z = _shift(ctx, ctx.cfg["direction"], prod)
    cyl = measures.Cylinder(tuple((c["k"], Ball(ctx.padic(c["center"]), int(c["radius_exp"])))
                                  for c in ctx.cfg["cylinder"]))
    for k, _ in cyl.constraints:
        if k >= prod.K:
            raise UsageError(f"cylinder coordinate {k} beyond K={prod.K}")
    base = measures.constancy_level(prod, z, cyl)
    extra = int(ctx.cfg.get("refinements", 2))
    rows, res = [], {}
    for b in ctx.cfg["b"]:
        vals = [measures.pd_of_measure(prod, b, z, cyl, level=base + j) for j in range(extra + 1)]
        spread = max(abs(v - vals[0]) for v in vals)
        res[str(b)] = {"value": vals[-1].real, "refinement_spread": spread}
        ctx.check(f"b={b}", spread)
        rows.extend((b, base + j, v.real, v.imag) for j, v in enumerate(vals))
    ctx.write_csv("table", "pdmeasure.csv", ["b", "level", "real", "imag"], rows)
    ctx.write_json("summary", "pdmeasure.json", {"constancy_level": base, "orders": res})
    return f"pdmeasure: constancy level {base}, " + ", ".join(
        f"b={b}: {v['value']:.6g}" for b, v in res.items())


def cmd_simulate(ctx: Context) -> str:
    spec = _flow(ctx)
    model = _noise_model(ctx)
    n = int(ctx.cfg.get("n_paths", 1))

    def one(j):
        noise = flows.sample_noise(model.measure, model.lattice, model.d, model.scaling,
                                   seed=[ctx.seed, j], prec=ctx.prec)
        return flows.simulate_flow(spec, noise)

    with ThreadPoolExecutor(max_workers=max(1, ctx.threads)) as ex:
        trajs = list(ex.map(one, range(n)))
    path = ctx.path("trajectories", "trajectories.jsonl")
    flows.write_trajectories(trajs, path, ctx.hash)
    closed = all(g.is_congruent_identity(1) for tr in trajs for g in tr.points)
    ctx.write_json("summary", "simulate.json", {"paths": n, "steps": model.lattice.size - 1,
                                                "group_closure": closed})
    return f"simulate: {n} paths x {model.lattice.size - 1} steps, closure {'ok' if closed else 'VIOLATED'}"


def cmd_histogram(ctx: Context) -> str:
    spec = _flow(ctx)
    model = _noise_model(ctx)
    m_q = int(ctx.cfg["m_q"])
    n = int(ctx.cfg.get("n_samples", 10000))
    h = flows.transition_histogram(spec, model, m_q, n, ctx.seed)
    ctx.write_csv("table", "histogram.csv", ["class_id", "count", "frequency"], h.rows())
    ctx.write_json("summary", "histogram.json", {"populated_classes": len(h.counts), "classes": h.n_classes,
                                                 "samples": n, "total_mass": float(h.total_mass())})
    return f"histogram: {len(h.counts)}/{h.n_classes} classes populated from {n} samples"


def cmd_regrep(ctx: Context) -> str:
    prod = _product(ctx, ctx.cfg["product"])
    K = ctx.cfg.get("K", prod.K)
    h = _shift(ctx, ctx.cfg["h"], prod)
    n = int(ctx.cfg.get("n_samples", 10000))
    tb = ctx.cfg.get("test_ball", {"center": 0, "radius_exp": 0})
    ball = Ball(ctx.padic(tb["center"]), int(tb["radius_exp"]))

    def f(g):
        return 1.0 if ball.contains(g[0]) else 0.0

    reference = prod.factor_ball_mass(0, ball.center, ball.radius_exp)
    pts = measures.sample_product(prod, n, ctx.seed, ctx.prec)
    chk = measures.unitarity_check(pts, h, f, prod, reference, K)
    ctx.write_json("summary", "regrep.json", {"norm_sq_estimate": chk.estimate, "standard_error": chk.standard_error,
                                              "norm_sq_exact": reference, "z_score": chk.z_score})
    if ctx.tolerance is not None:
        ctx.check("z_score", chk.z_score)
    return f"regrep: |T_h f|^2 = {chk.estimate:.6g} +- {chk.standard_error:.2g}, |f|^2 = {reference:.6g}"


def cmd_picard(ctx: Context) -> str:
    model = _noise_model(ctx)
    if model.d != 1:
        raise UsageError("picard needs one noise coordinate")
    noise = flows.sample_noise(model.measure, model.lattice, 1, model.scaling, ctx.seed, ctx.prec)
    coeffs = {(c["k"], c["l"]): flows.Linear(ctx.padic(c.get("const", 0)), ctx.padic(c.get("slope", 0)))
              for c in ctx.cfg["coefficients"]}
    res = flows.picard_iterate(coeffs, ctx.padic(ctx.cfg["x0"]), noise, int(ctx.cfg.get("n_iter", 50)),
                               prec=ctx.prec)
    ctx.write_csv("differences", "picard_differences.csv", ["iteration", "sup_norm_difference"],
                  [(i + 1, d) for i, d in enumerate(res.differences)])
    ctx.write_csv("solution", "picard_solution.csv", ["index", "t", "x"],
                  [(i, str(t.to_fraction()), str(x.to_fraction()))
                   for i, (t, x) in enumerate(zip(model.lattice.points(ctx.prec), res.solution))])
    ctx.write_json("summary", "picard.json", {"iterations": res.iterations, "converged": res.converged,
                                              "diverged": res.diverged, "message": res.message})
    state = "converged" if res.converged else ("DIVERGED" if res.diverged else "not converged")
    if not res.converged:
        ctx.failures.append(f"picard {state}: {res.message}")
    return f"picard: {state} after {res.iterations} iterations"


COMMANDS = {
    "density": cmd_density, "fourier": cmd_fourier, "vladimirov": cmd_vladimirov, "pd": cmd_pd,
    "riesz": cmd_riesz, "kakutani": cmd_kakutani, "quasiinv": cmd_quasiinv, "pdmeasure": cmd_pdmeasure,
    "simulate": cmd_simulate, "histogram": cmd_histogram, "regrep": cmd_regrep, "picard": cmd_picard,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nalab", description="p-adic analysis experiments")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path, help="JSON config")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--seed", type=int, help="overrides the config seed (u64)")
        sp.add_argument("--threads", type=int, default=1, help="workers for per-path simulation")
        sp.add_argument("--tolerance", type=float, help="fail (exit 1) when a checked error exceeds this")
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.subcommand)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise UsageError("seed must be an unsigned 64-bit integer")
            cfg = copy.deepcopy(cfg)
            cfg["seed"] = args.seed
        if args.threads < 1:
            raise UsageError("--threads must be positive")
        args.out.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, args.out, args.threads, args.tolerance)
        summary = COMMANDS[args.subcommand](ctx)
    except UsageError as err:
        print(f"nalab: error: {err}", file=sys.stderr)
        return 2
    except (DomainError, ArithmeticError, ValueError) as err:
        print(f"nalab: numeric failure: {err}", file=sys.stderr)
        return 1
    print(summary)
    if ctx.failures:
        for msg in ctx.failures:
            print(f"nalab: check failed: {msg}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
