"""Command-line experiments: ``menger {curvature,beta-scan,energy,scaling-check}``.

Every command reads one JSON config, builds a weighted cloud, and emits a
canonical JSON report (plus a CSV for ``beta-scan``). Reports contain no
timestamps or thread counts, so identical configs give identical bytes.

Exit codes: 0 success, 2 config error, 3 data error, 4 budget refusal.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .curvature import (EnergyParams, SearchParams, energy, energy_tp, eta_d_check, kappa_batch,
                        tangent_field, _inverse_radius)
from .exceptions import BudgetError, DomainError, MengerError
from .flatness import (OscillationRecord, ahlfors_density, default_tangent_radii, dyadic_radii,
                       scale_records, scaling_fit, tangent_estimate)
from .geometry import min_heights, simplex_diameters, simplex_volumes, unit_ball_volume
from .grassmann import grassmann_distance
from .reports import canonical_json, config_hash, write_records_csv
from .shapes import GeneratorSpec, generate, load_cloud_csv, load_mesh, sample_mesh

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_BUDGET = 0, 2, 3, 4

_INT = {"type": "integer", "minimum": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["input"],
    "additionalProperties": False,
    "properties": {
        "input": {"oneOf": [
            {"type": "object", "required": ["generator"], "additionalProperties": False,
             "properties": {"generator": {
                 "type": "object", "required": ["kind", "N"], "additionalProperties": False,
                 "properties": {"kind": {"type": "string"}, "N": _INT,
                                "params": {"type": "object"}}}}},
            {"type": "object", "required": ["file"], "additionalProperties": False,
             "properties": {"file": {"type": "string"}, "samples": _INT, "m": _INT}},
        ]},
        "params": {"type": "object", "additionalProperties": False,
                   "properties": {"m": _INT, "l": _INT, "p": _POS}},
        "radii": {"oneOf": [
            {"type": "array", "items": _POS, "minItems": 1},
            {"type": "object", "required": ["r_max"], "additionalProperties": False,
             "properties": {"r_max": _POS, "levels": _INT}},
        ]},
        "centers": {"oneOf": [
            {"type": "array", "items": {"type": "array", "items": {"type": "number"}},
             "minItems": 1},
            {"type": "object", "additionalProperties": False,
             "properties": {"count": _INT,
                            "indices": {"type": "array", "items": {"type": "integer"},
                                        "minItems": 1}}},
        ]},
        "budgets": {"type": "object", "additionalProperties": False, "properties": {
            "mc_tuples": _INT, "n_random": _INT, "n_refine": {"type": "integer", "minimum": 0},
            "k_neighbors": _INT, "exhaustive_budget": _INT, "curvature_tuples": _INT,
            "eta_d_trials": _INT,
            "energy_mode": {"enum": ["monte_carlo", "exhaustive"]}}},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"dir": {"type": "string"}}},
        "curvature": {"type": "object", "additionalProperties": False, "properties": {
            "kinds": {"type": "array", "items": {
                "enum": ["kappa", "kappa_prime", "menger", "svdm", "tp"]}},
            "bins": _INT}},
        "energy": {"type": "object", "additionalProperties": False,
                   "properties": {"kind": {"enum": ["menger", "tp"]}}},
        "scaling": {"type": "object", "additionalProperties": False, "properties": {
            "field": {"enum": ["beta", "theta", "oscillation"]},
            "ahlfors": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
            "min_radius_factor": {"type": "number", "minimum": 0},
            "base_point": {"type": "array", "items": {"type": "number"}}}},
    },
}


class ConfigError(MengerError):
    pass


class _Context:
    def __init__(self, config, base_dir, threads):
        self.config = config
        self.base_dir = base_dir
        self.threads = threads
        self.seed = int(config.get("seed", 0))
        self.budgets = config.get("budgets", {})


def load_config(path):
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_config(config)
    return config


def validate_config(config):
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def build_cloud(ctx):
    spec = ctx.config["input"]
    if "generator" in spec:
        g = spec["generator"]
        try:
            return generate(GeneratorSpec(g["kind"], g["N"], ctx.seed, dict(g.get("params", {}))))
        except DomainError as exc:
            raise ConfigError(f"generator: {exc}") from exc
    path = Path(spec["file"])
    if not path.is_absolute():
        path = ctx.base_dir / path
    ext = path.suffix.lower()
    if ext in (".off", ".obj"):
        return sample_mesh(load_mesh(path), spec.get("samples", 2000), seed=ctx.seed)
    if ext == ".csv":
        cloud = load_cloud_csv(path)
        if "m" in spec and spec["m"] != cloud.m:
            raise DomainError(f"file declares m={cloud.m}, config asks for m={spec['m']}")
        return cloud
    raise ConfigError(f"unsupported input file type {ext!r}")


def energy_params(ctx, cloud, required=True):
    p = ctx.config.get("params", {})
    if "m" in p and p["m"] != cloud.m:
        raise ConfigError(f"params.m={p['m']} does not match the cloud's m={cloud.m}")
    if "l" not in p or "p" not in p:
        if required:
            raise ConfigError("params.l and params.p are required for this command")
        return None
    try:
        return EnergyParams(float(p["p"]), int(p["l"]), cloud.m)
    except DomainError as exc:
        raise ConfigError(f"params: {exc}") from exc


def search_params(ctx):
    b = ctx.budgets
    return SearchParams(b.get("n_random", 256), b.get("n_refine", 4), b.get("k_neighbors", 8),
                        b.get("exhaustive_budget", 20_000))


def radii_schedule(ctx, cloud):
    r = ctx.config.get("radii", {"r_max": 0.1, "levels": 7})
    if isinstance(r, list):
        return sorted((float(v) for v in r), reverse=True)
    return dyadic_radii(r["r_max"], r.get("levels", 7))


def centers(ctx, cloud):
    c = ctx.config.get("centers", {"count": 8})
    if isinstance(c, list):
        C = np.array(c, dtype=np.float64)
        if C.ndim != 2 or C.shape[1] != cloud.n:
            raise ConfigError(f"centers must be points in R^{cloud.n}")
        return C
    if "indices" in c:
        idx = np.array(c["indices"])
        if idx.min() < 0 or idx.max() >= len(cloud):
            raise ConfigError("center index out of range")
        return cloud.points[idx]
    count = min(c.get("count", 8), len(cloud))
    rng = np.random.default_rng(np.random.SeedSequence([ctx.seed, 1]))
    return cloud.points[np.sort(rng.choice(len(cloud), size=count, replace=False))]


def header(command, ctx, cloud, params):
    h = {"tool": "menger", "version": __version__, "command": command,
         "config_sha256": config_hash(ctx.config), "seed": ctx.seed,
         "cloud": {"provenance": cloud.provenance, "n_points": len(cloud), "n": cloud.n,
                   "m": cloud.m, "total_weight": cloud.total_weight,
                   "covering_radius": cloud.covering_radius}}
    if params is not None:
        h["derived"] = params.as_dict()
    return h


def _stats(values, bins):
    v = np.asarray(values, dtype=np.float64)
    top = float(v.max()) if v.size else 0.0
    counts, edges = np.histogram(v, bins=bins, range=(0.0, top if top > 0 else 1.0))
    return {"n": int(v.size), "max": top, "mean": float(v.mean()) if v.size else 0.0,
            "min": float(v.min()) if v.size else 0.0,
            "histogram": {"edges": edges.tolist(), "counts": counts.tolist()}}


# ---------------------------------------------------------------------------
# commands


def cmd_curvature(cloud, ctx):
    cfg = ctx.config.get("curvature", {})
    m, n = cloud.m, cloud.n
    kinds = cfg.get("kinds")
    if kinds is None:
        kinds = ["kappa", "kappa_prime"] + (["menger"] if m == 1 else [])
        kinds += ["svdm"] if (m, n) == (2, 3) else []
    bins = cfg.get("bins", 20)
    count = ctx.budgets.get("curvature_tuples", 10_000)
    rng = np.random.default_rng(ctx.seed)
    idx = rng.integers(0, len(cloud), size=(count, m + 2))
    batch = cloud.points[idx]
    d = simplex_diameters(batch)
    ok = d > 0
    out = {}
    for kind in kinds:
        vals = np.zeros(count)
        if kind == "kappa":
            vals = kappa_batch(batch)
        elif kind == "kappa_prime":
            vals[ok] = min_heights(batch[ok]) / d[ok] ** 2
        elif kind == "menger":
            if m != 1:
                raise ConfigError("menger curvature needs m = 1 (triangles)")
            a = np.linalg.norm(batch[:, 0] - batch[:, 1], axis=1)
            b = np.linalg.norm(batch[:, 1] - batch[:, 2], axis=1)
            c = np.linalg.norm(batch[:, 2] - batch[:, 0], axis=1)
            prod = a * b * c
            good = prod > 0
            vals[good] = 4.0 * simplex_volumes(batch[good]) / prod[good]
        elif kind == "svdm":
            if (m, n) != (2, 3):
                raise ConfigError("svdm curvature needs tetrahedra in R^3")
            vol = simplex_volumes(batch)
            area = sum(simplex_volumes(np.delete(batch, i, axis=1)) for i in range(4))
            good = (vol > 0) & ok
            vals[good] = vol[good] / (area[good] * d[good] ** 2)
        elif kind == "tp":
            n_pairs = max(1, count // 10)
            pairs = rng.integers(0, len(cloud), size=(n_pairs, 2))
            field = tangent_field(cloud, np.unique(pairs[:, 0]))
            vals = np.array([_inverse_radius(field[int(i)], cloud.points[i],
                                             cloud.points[j][None])[0] for i, j in pairs])
        out[kind] = _stats(vals, bins)
    report = header("curvature", ctx, cloud, energy_params(ctx, cloud, required=False))
    report["n_tuples"] = count
    report["curvatures"] = out
    return report, {}


def _fit_or_reason(records, field):
    try:
        return scaling_fit(records, field).__dict__, None
    except DomainError as exc:
        return None, str(exc)


def _beta_scan(cloud, ctx):
    radii = radii_schedule(ctx, cloud)
    recs = scale_records(cloud, centers(ctx, cloud), radii)
    factor = ctx.config.get("scaling", {}).get("min_radius_factor", 10.0)
    floor = factor * cloud.covering_radius
    usable = [r for r in recs if r.radius >= floor]
    return recs, usable, floor


def cmd_beta_scan(cloud, ctx):
    recs, usable, floor = _beta_scan(cloud, ctx)
    field = ctx.config.get("scaling", {}).get("field", "beta")
    if field == "oscillation":
        raise ConfigError("beta-scan fits beta or theta; use scaling-check for oscillation")
    fit, reason = _fit_or_reason(usable, field)
    report = header("beta-scan", ctx, cloud, energy_params(ctx, cloud, required=False))
    ratios = [r.theta / r.beta for r in recs if r.beta > 0]
    report.update({
        "n_records": len(recs), "radius_floor": floor, "n_fitted": len(usable), "field": field,
        "fit": fit, "fit_skipped": reason,
        "beta_max": max(r.beta for r in recs), "theta_max": max(r.theta for r in recs),
        "theta_over_beta_max": max(ratios) if ratios else None,
        "records_csv": "beta_scan.csv"})
    return report, {"beta_scan.csv": recs}


def _energy(cloud, ctx, params):
    mode = ctx.budgets.get("energy_mode", "monte_carlo")
    budget = (ctx.budgets.get("exhaustive_budget", 5_000_000) if mode == "exhaustive"
              else ctx.budgets.get("mc_tuples", 10_000))
    kind = ctx.config.get("energy", {}).get("kind", "menger")
    if kind == "tp":
        return energy_tp(cloud, params.p, mode, budget, ctx.seed, threads=ctx.threads)
    return energy(cloud, params, mode, budget, ctx.seed, search_params(ctx), ctx.threads)


def cmd_energy(cloud, ctx):
    params = energy_params(ctx, cloud)
    est = _energy(cloud, ctx, params)
    report = header("energy", ctx, cloud, params)
    report["energy_kind"] = ctx.config.get("energy", {}).get("kind", "menger")
    report["estimate"] = est.to_dict()
    return report, {}


def _ahlfors(cloud, ctx, radii, C):
    given = ctx.config.get("scaling", {}).get("ahlfors")
    if given is not None:
        return float(given[0]), float(given[1]), "config"
    R = max(radii)
    om = unit_ball_volume(cloud.m)
    A = min(ahlfors_density(cloud, c, r) * om for c in C for r in radii)
    return A, R, "estimated"


def _oscillation_records(cloud, ctx, radii):
    cfg = ctx.config.get("scaling", {})
    base = np.asarray(cfg.get("base_point", cloud.points[0]), dtype=np.float64)
    if base.shape != (cloud.n,):
        raise ConfigError(f"base_point must be a point in R^{cloud.n}")
    t_radii = default_tangent_radii(cloud, 16.0 * cloud.covering_radius)
    tx = tangent_estimate(cloud, base, t_radii).plane
    dist = np.linalg.norm(cloud.points - base, axis=1)
    out = []
    for r in radii:
        j = int(np.argmin(np.abs(dist - r)))
        y = cloud.points[j]
        ty = tangent_estimate(cloud, y, t_radii).plane
        out.append(OscillationRecord(base, y, float(dist[j]), grassmann_distance(tx, ty)))
    return out


def cmd_scaling_check(cloud, ctx):
    params = energy_params(ctx, cloud)
    report = header("scaling-check", ctx, cloud, params)
    est = _energy(cloud, ctx, params)
    report["energy"] = est.to_dict()
    radii = radii_schedule(ctx, cloud)
    C = centers(ctx, cloud)
    A, R, source = _ahlfors(cloud, ctx, radii, C)
    report["ahlfors"] = {"A": A, "R": R, "source": source}
    if params.lambda_ <= 0:
        report["eta_d"] = {"skipped": "p <= m l"}
    elif est.value <= 0:
        report["eta_d"] = {"skipped": "measured energy is zero"}
    else:
        trials = ctx.budgets.get("eta_d_trials", 10_000)
        viol = eta_d_check(cloud, est.value, params, (A, R), trials, seed=ctx.seed)
        report["eta_d"] = {"trials": trials, "n_violations": len(viol),
                           "first_violations": viol[:5]}
    field = ctx.config.get("scaling", {}).get("field", "beta")
    if field == "oscillation":
        recs = _oscillation_records(cloud, ctx, radii)
    else:
        _, recs, _ = _beta_scan(cloud, ctx)
    fit, reason = _fit_or_reason(recs, field)
    target = params.lambda_ / params.kappa
    report["exponents"] = {
        "field": field, "fit": fit, "fit_skipped": reason,
        "lambda_over_kappa": target, "alpha": params.alpha,
        "exponent_at_least_lambda_over_kappa": None if fit is None else fit["exponent"] >= target,
    }
    return report, {}


COMMANDS = {
    "curvature": cmd_curvature,
    "beta-scan": cmd_beta_scan,
    "energy": cmd_energy,
    "scaling-check": cmd_scaling_check,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="menger", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"menger {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--threads", type=int, help="worker threads (default: $MENGER_THREADS or 1)")
        p.add_argument("--out", help="directory for the report files")
    return parser


def _threads(args):
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        return args.threads
    env = os.environ.get("MENGER_THREADS")
    if not env:
        return 1
    try:
        value = int(env)
    except ValueError:
        raise ConfigError(f"MENGER_THREADS={env!r} is not an integer") from None
    if value < 1:
        raise ConfigError("MENGER_THREADS must be positive")
    return value


def run(args):
    config = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        config["seed"] = args.seed
    ctx = _Context(config, Path(args.config).resolve().parent, _threads(args))
    cloud = build_cloud(ctx)
    report, extra = COMMANDS[args.command](cloud, ctx)
    text = canonical_json(report)
    out = args.out or config.get("output", {}).get("dir")
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.command.replace("-", "_") + ".json"
    (out / name).write_text(text)
    for fname, recs in extra.items():
        with open(out / fname, "w") as fh:
            write_records_csv(recs, fh)
    print(f"wrote {out / name}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (MengerError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
