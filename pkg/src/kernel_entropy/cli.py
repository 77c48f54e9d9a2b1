"""Command-line experiment harness.

Every run writes a CSV table whose leading ``#`` lines carry the schema
version, the command and the config hash, plus a JSON summary.  The hash is
the sha256 of the sorted JSON config (output path excluded), so identical
settings give identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import budget as bud
from . import decomposition as dec
from . import entropy as ent
from . import kernels as ker
from .errors import PreconditionError, ResourceCapError
from .io import coeff_csv, read_table, rows_to_csv
from .rates import fit_rates
from .smoothness import ClassParams, certify_H
from .spectral import (Grid, block_cardinality, block_indices_upto, evaluate_on_grid,
                       hyperbolic_cross, norm_vector_Lq, parse_vector_exponent)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_PRECONDITION, EXIT_CAP = 0, 2, 3


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params, "schema_version": SCHEMA_VERSION}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def comments(self) -> list[str]:
        return [f"schema_version={SCHEMA_VERSION}", f"command={self.command}",
                f"config_hash={self.config_hash()}"]


@dataclass
class Artifact:
    csv: str
    summary: dict


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def _parse_k(text: str | None, default: list[int]) -> list[int]:
    """``"5"``, ``"0:10"`` (inclusive) or ``"1,2,4"``."""
    if text is None:
        return default
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",")]


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise PreconditionError(f"{args.command} requires {', '.join(missing)}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _build_kernel(family, d, order, a, cutoff):
    if family == "fejer":
        return ker.fejer((order,) * d)
    if family == "vdp":
        return ker.vdp((order,) * d)
    if family == "bernoulli":
        return ker.bernoulli((a,) * d, cutoff, with_bound=a > 1)
    raise PreconditionError(f"unknown kernel family {family!r}")


def cmd_kernel(args, cfg) -> Artifact:
    if args.family == "bernoulli":
        _need(args, "a")
        cutoff = args.cutoff if args.cutoff is not None else args.order
        if cutoff is None:
            raise PreconditionError("bernoulli requires --cutoff or --order")
        built = _build_kernel("bernoulli", args.d, None, args.a, cutoff)
        poly, tail = built.poly, built.tail_bound
    else:
        _need(args, "order")
        if args.order < 1:
            raise PreconditionError(f"--order must be >= 1, got {args.order}")
        poly, tail = _build_kernel(args.family, args.d, args.order, None, None), 0.0
    grid = Grid.for_polynomial(poly, args.oversample)
    vals = evaluate_on_grid(poly, grid)
    summary = {
        "rows": len(poly),
        "degree": list(poly.degree),
        "norm_1": norm_vector_Lq(poly, (1.0,) * args.d, values=vals),
        "value_at_0": float(poly(np.zeros((1, args.d)))[0].real),
        "tail_bound": tail,
    }
    return Artifact(coeff_csv(poly, cfg.comments()), summary)


def cmd_blocks(args, cfg) -> Artifact:
    _need(args, "n")
    rows = [list(s) + [block_cardinality(s)] for s in block_indices_upto(args.n, args.d)]
    header = [f"s{j + 1}" for j in range(args.d)] + ["cardinality"]
    size = len(hyperbolic_cross(args.n, args.d))
    summary = {"n": args.n, "d": args.d, "cross_size": size, "blocks": len(rows)}
    return Artifact(rows_to_csv(header, rows, cfg.comments()), summary)


def _difference_bernoulli(args, cutoff):
    a = args.a if args.a is not None else 2 * args.r
    return ker.bernoulli_difference_kernel(a, args.d, cutoff), a


def cmd_certify(args, cfg) -> Artifact:
    _need(args, "r", "smax")
    r = args.r
    if args.kernel == "bernoulli":
        cutoff = args.cutoff if args.cutoff is not None else 2 ** ((args.smax + 1) // 2) - 1
        f, a = _difference_bernoulli(args, cutoff)
        params = ClassParams((r,) * (2 * args.d), parse_vector_exponent(args.q, 2 * args.d),
                             int(math.floor(r)) + 1) if args.q else ClassParams.split2d(r, args.d)
    else:
        _need(args, "order")
        f, a = _build_kernel(args.kernel, args.d, args.order, None, None), None
        q = parse_vector_exponent(args.q or "inf", args.d)
        params = ClassParams((r,) * args.d, q, int(math.floor(r)) + 1)
    cert = certify_H(f, params, args.smax, oversample=args.oversample)
    summary = {"B_hat": cert.B_hat, "slope": cert.slope, "fit_range": list(cert.fit_range),
               "tail_bound": cert.tail_bound, "params": cert.params.to_dict(), "kernel_a": a,
               "blocks": len(cert.table)}
    return Artifact(cert.to_csv(cfg.comments()), summary)


def _as_poly(x):
    return x.to_bivariate() if isinstance(x, ker.DifferenceKernel) else x


def cmd_decompose(args, cfg) -> Artifact:
    _need(args, "r", "u")
    n0 = 2 * args.u + 1
    n_max = args.n if args.n is not None else n0 + 10
    # levels up to n_max only see frequencies below 2^ceil(n_max / 2)
    cutoff = args.cutoff if args.cutoff is not None else 2 ** math.ceil(n_max / 2) - 1
    K, a = _difference_bernoulli(args, cutoff)
    split = dec.split_kernel(K, args.u, args.r, n_max=n_max, oversample=args.oversample)
    err = _as_poly(split.reconstruct()).max_abs_diff(_as_poly(K))
    ratios = list(split.bound_ratios().values())
    summary = {"u": args.u, "n0": split.n0, "n_max": split.n_max, "cutoff": cutoff, "kernel_a": a,
               "reconstruction_error": err, "tail_bound": split.tail_bound,
               "ratio_min": min(ratios) if ratios else None,
               "ratio_max": max(ratios) if ratios else None}
    return Artifact(split.summary_csv(cfg.comments()), summary)


def _load_instance(args) -> ent.MetricInstance:
    if args.points:
        header, data = read_table(args.points)
        coords = data[:, 1:] if header and header[0].lower() in ("id", "point", "point_id") else data
        return ent.MetricInstance.from_points(coords, args.metric, p=args.p or 2.0)
    if args.dist:
        _, data = read_table(args.dist)
        return ent.MetricInstance(data, metric="custom")
    if args.cube is not None:
        return ent.discretized_cube(args.cube, args.per_axis)
    raise PreconditionError("entropy needs --points, --dist or --cube")


def _ball_instance(args) -> ent.MetricInstance:
    _need(args, "n")
    Q = hyperbolic_cross(args.n, args.d)
    return ent.ball_sampler(Q, args.q or "1", args.count, args.seed, target=args.target,
                            oversample=args.oversample)


def cmd_entropy(args, cfg) -> Artifact:
    mode = args.mode
    if mode in ("exact", "greedy"):
        _need(args, "eps")
        inst = _load_instance(args)
        if mode == "exact":
            res = ent.covering_exact(inst, args.eps, cap=args.cap)
        else:
            res = ent.covering_greedy(inst, args.eps)
        rows = [(res.eps, res.n_lower, res.n_upper, res.exact, " ".join(map(str, res.centers)))]
        csv = rows_to_csv(["eps", "n_lower", "n_upper", "exact", "centers"], rows, cfg.comments())
        summary = {"points": inst.n, "eps": res.eps, "n_lower": res.n_lower,
                   "n_upper": res.n_upper, "exact": res.exact}
        if args.cube is not None:
            lo, hi = ent.unit_ball_bounds(args.cube, eps=args.eps)
            summary.update(ball_lower=lo, ball_upper=hi)
        return Artifact(csv, summary)
    inst = _ball_instance(args) if mode == "ball" else _load_instance(args)
    ks = _parse_k(args.k, list(range(0, max(1, int(math.ceil(math.log2(max(inst.n, 2))))) + 1)))
    table = ent.entropy_table(inst, ks)
    summary = {"points": inst.n, "diameter": inst.diameter, "k": ks,
               "eps_upper": [b.eps_upper for b in table], "eps_lower": [b.eps_lower for b in table]}
    if mode == "ball":
        br = inst.meta["norm_brackets"]
        summary.update(cross_size=int(len(hyperbolic_cross(args.n, args.d))),
                       norm_bracket_min=min(b[0] for b in br), norm_bracket_max=max(b[1] for b in br),
                       grid=list(inst.meta["grid"]))
    return Artifact(ent.entropy_table_csv(table, args.seed, cfg.comments()), summary)


def cmd_budget(args, cfg) -> Artifact:
    _need(args, "a", "u")
    spec = bud.LevelClassSpec(args.a, args.b, 1, args.c)
    prof = bud.EAProfile(args.alpha, args.beta, args.gamma)
    plan = bud.budget_allocate(spec, prof, args.u, args.Du)
    csv = rows_to_csv(["level", "k"], plan.budgets, cfg.comments())
    summary = {"u": plan.u, "n0": plan.n0, "mu": plan.mu, "D_u": plan.D_u, "total": plan.total,
               "n_max": plan.n_max, "constant": plan.constant,
               "predicted_power": str(plan.predicted_power),
               "predicted_log_power": str(plan.predicted_log_power)}
    return Artifact(csv, summary)


def cmd_predict(args, cfg) -> Artifact:
    spec, prof = bud.kernel_class_instantiation(args.d, args.target, r=args.r, p=args.p)
    ex = bud.predicted_exponents(spec, prof)
    rows = [(name, str(pw), str(lp)) for name, (pw, lp) in ex.items()]
    csv = rows_to_csv(["regime", "power", "log_power"], rows, cfg.comments())
    summary = {name: {"power": str(pw), "log_power": str(lp)} for name, (pw, lp) in ex.items()}
    summary["profile"] = [str(prof.alpha), str(prof.beta), str(prof.gamma)]
    summary["class"] = {"a": str(spec.a), "b": str(spec.b), "c": str(spec.c)}
    return Artifact(csv, summary)


def cmd_rates(args, cfg) -> Artifact:
    _need(args, "table")
    header, data = read_table(args.table)
    col = args.column if args.column in header else ("eps" if "eps" in header else "eps_upper")
    if "k" not in header or col not in header:
        raise PreconditionError(f"table needs columns k and {col}, got {header}")
    k, eps = data[:, header.index("k")], data[:, header.index(col)]
    if args.k:
        keep = np.isin(k, _parse_k(args.k, []))
        k, eps = k[keep], eps[keep]
    fit = fit_rates(k, eps, args.lam_mode, args.lam, bootstrap=args.bootstrap, seed=args.seed)
    pos = eps > 0
    model = fit.C * k[pos] ** (-fit.rho) * (np.log2(k[pos]) ** fit.lam if fit.lam else 1.0)
    csv = rows_to_csv(["k", "eps", "model"], zip(k[pos], eps[pos], model), cfg.comments())
    return Artifact(csv, {"column": col, **fit.to_record()})


COMMANDS = {"kernel": cmd_kernel, "blocks": cmd_blocks, "certify": cmd_certify,
            "decompose": cmd_decompose, "entropy": cmd_entropy, "budget": cmd_budget,
            "predict": cmd_predict, "rates": cmd_rates}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=int, default=1, help="variables per group")
    common.add_argument("--r", type=float, help="smoothness")
    common.add_argument("--a", type=float, help="kernel or level decay exponent")
    common.add_argument("--q", help="exponent vector, comma list, 'inf' allowed")
    common.add_argument("--u", type=int, help="split parameter")
    common.add_argument("--n", type=int, help="level / cross index")
    common.add_argument("--smax", type=int, help="largest block level")
    common.add_argument("--k", help="k value, 'lo:hi' range or comma list")
    common.add_argument("--eps", type=float, help="covering radius")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--oversample", type=int, default=8)
    common.add_argument("--out", help="output directory (stdout if omitted)")

    p = argparse.ArgumentParser(prog="kernel-entropy", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("kernel", parents=[common], help="kernel coefficients")
    s.add_argument("--family", choices=["fejer", "vdp", "bernoulli"], default="fejer")
    s.add_argument("--order", type=int)
    s.add_argument("--cutoff", type=int)

    sub.add_parser("blocks", parents=[common], help="dyadic blocks of the hyperbolic cross")

    s = sub.add_parser("certify", parents=[common], help="block-norm membership certificate")
    s.add_argument("--kernel", choices=["bernoulli", "fejer", "vdp"], default="bernoulli")
    s.add_argument("--order", type=int)
    s.add_argument("--cutoff", type=int)

    s = sub.add_parser("decompose", parents=[common], help="split a difference kernel by level")
    s.add_argument("--cutoff", type=int)

    s = sub.add_parser("entropy", parents=[common], help="covering and entropy numbers")
    s.add_argument("mode", choices=["exact", "greedy", "bracket", "ball"])
    s.add_argument("--points", help="CSV of point coordinates (optional leading id column)")
    s.add_argument("--dist", help="CSV distance matrix with a header row")
    s.add_argument("--metric", choices=["sup", "lp"], default="sup")
    s.add_argument("--p", type=float)
    s.add_argument("--cube", type=int, help="discretized cube dimension")
    s.add_argument("--per-axis", type=int, default=5)
    s.add_argument("--cap", type=int, default=ent.EXACT_CAP, help="largest instance for exact mode")
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--target", default="inf", help="target norm exponent for ball clouds")

    s = sub.add_parser("budget", parents=[common], help="multilevel entropy budget")
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--b", type=float, default=0.0)
    s.add_argument("--c", type=float, default=0.0)
    s.add_argument("--Du", type=float)

    s = sub.add_parser("predict", parents=[common], help="predicted rate exponents")
    s.add_argument("--target", choices=["inf", "p"], default="inf")
    s.add_argument("--p", type=float)

    s = sub.add_parser("rates", parents=[common], help="fit eps(k) = C k^-rho (log2 k)^lam")
    s.add_argument("--table", help="CSV with columns k and eps (or eps_upper)")
    s.add_argument("--column", default="eps_upper")
    s.add_argument("--lam-mode", choices=["fixed", "free"], default="fixed")
    s.add_argument("--lam", type=float, default=0.0)
    s.add_argument("--bootstrap", type=int, default=200)
    return p


def make_config(args) -> ExperimentConfig:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out")}
    for key in ("points", "dist", "table"):
        path = params.get(key)
        if path:
            params[key + "_sha256"] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
            params[key] = Path(path).name
    return ExperimentConfig(args.command, _json_safe(params))


def run(args) -> Artifact:
    cfg = make_config(args)
    art = COMMANDS[args.command](args, cfg)
    art.summary = _json_safe({"config": cfg.to_dict(), "config_hash": cfg.config_hash(),
                              "result": art.summary})
    return art


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        art = run(args)
    except ResourceCapError as exc:
        print(f"error: resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (PreconditionError, FileNotFoundError) as exc:
        print(f"error: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    summary = json.dumps(art.summary, sort_keys=True, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        name = args.command + (f"_{args.mode}" if args.command == "entropy" else "")
        (out / f"{name}.csv").write_text(art.csv)
        (out / f"{name}.json").write_text(summary)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(art.csv)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
