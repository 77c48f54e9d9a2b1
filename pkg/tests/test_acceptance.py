"""Acceptance checks, one test per criterion, each reporting a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest
import sympy as sp

from kernel_entropy.budget import (EAProfile, LevelClassSpec, budget_allocate,
                                   kernel_class_instantiation, predicted_exponents)
from kernel_entropy.cli import main
from kernel_entropy.decomposition import block_norm_table, image_functions, split_kernel
from kernel_entropy.entropy import (MetricInstance, ball_sampler, covering_exact, covering_greedy,
                                    discretized_cube, entropy_table, unit_ball_bounds, packing_number)
from kernel_entropy.kernels import (DifferenceKernel, bernoulli_difference_kernel, block_sum, fejer,
                                    vdp, vdp_projection)
from kernel_entropy.smoothness import fit_log2_slope
from kernel_entropy.spectral import (Grid, TrigPolynomial, block_indices_upto, dyadic_block_indices,
                                     evaluate_on_grid, hyperbolic_cross, norm_Lq, random_polynomial)


def as_poly(K):
    return K.to_bivariate() if isinstance(K, DifferenceKernel) else K


def test_c01_fejer_identities(criterion):
    start = time.perf_counter()
    worst_l1, worst_sup = 0.0, 0.0
    for j in range(1, 65):
        K = fejer(j)
        vals = evaluate_on_grid(K, Grid.for_polynomial(K))
        worst_l1 = max(worst_l1, abs(norm_Lq(vals, 1) - 1))
        # the value at 0 is the coefficient sum; fsum rounds it once
        at0 = math.fsum(K.coeffs.real)
        worst_sup = max(worst_sup, abs(at0 - j), max(0.0, np.abs(vals).max() - j * (1 + 1e-13)))
    elapsed = time.perf_counter() - start
    ok = worst_l1 <= 1e-10 and worst_sup == 0.0 and elapsed < 5
    criterion(1, "Fejer L1 = 1, sup = j at 0", ok,
              f"max |L1-1|={worst_l1:.2e}, max |sup-j|={worst_sup:.1e}, {elapsed:.2f}s")


def test_c02_vdp_reproduction(criterion):
    rng = np.random.default_rng(2)
    worst = 0.0
    for m in range(1, 65):
        V = vdp(m)
        k = np.arange(-(m - 1), m)[:, None] if m > 1 else np.zeros((1, 1), dtype=int)
        for _ in range(50):
            t = TrigPolynomial(1, k, rng.standard_normal(len(k)) + 1j * rng.standard_normal(len(k)))
            worst = max(worst, t.convolve(V).max_abs_diff(t))
    criterion(2, "vdp(m) * t = t on T((-m, m))", worst < 1e-10, f"max coeff error {worst:.2e}")


def test_c03_telescoping(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for d in (1, 2):
        for n in range(0, 8):
            for _ in range(5):
                freqs = rng.integers(-(2 ** (n + 1)), 2 ** (n + 1) + 1, size=(120, d))
                f = TrigPolynomial(d, freqs, rng.standard_normal(120) + 1j * rng.standard_normal(120))
                worst = max(worst, block_sum(f, n).max_abs_diff(vdp_projection(f, n)))
    criterion(3, "sum of A_s over ||s||_1 <= n = V-projection", worst < 1e-10, f"max error {worst:.2e}")


def _vector_blocks(k):
    # smallest s with |k| < 2^s, from floating logs (independent of integer bit tricks)
    a = np.abs(k).astype(float)
    return np.where(a == 0, 0, np.floor(np.log2(np.maximum(a, 1))) + 1).astype(int)


def test_c04_block_combinatorics(criterion):
    d1 = all(len(hyperbolic_cross(n, 1)) == 2 ** (n + 1) - 1 for n in range(0, 21))
    d2 = True
    for n in range(0, 11):
        box = np.arange(-(2**n), 2**n + 1)
        K1, K2 = np.meshgrid(box, box, indexing="ij")
        keep = _vector_blocks(K1) + _vector_blocks(K2) <= n
        brute = np.stack([K1[keep], K2[keep]], axis=1)
        got = hyperbolic_cross(n, 2)
        brute = brute[np.lexsort(brute.T[::-1])]
        got = got[np.lexsort(got.T[::-1])]
        d2 &= got.shape == brute.shape and np.array_equal(got, brute)
    disjoint = True
    for d, n in ((1, 12), (2, 8)):
        pieces = [dyadic_block_indices(s) for s in block_indices_upto(n, d)]
        allk = np.concatenate(pieces)
        disjoint &= len(np.unique(allk, axis=0)) == len(allk)
    criterion(4, "|Q_n|, d=2 brute force, disjoint blocks", d1 and d2 and disjoint,
              f"d1 sizes {d1}, d2 brute force {d2}, disjoint {disjoint}")


def test_c05_bernoulli_difference_decay(criterion):
    s_max, lo, hi = 20, 2, 10
    # blocks with ||s||_1 <= 20 only involve |k| < 2^10, so this cutoff truncates nothing they see
    cutoff = 2**11 - 1
    parts, ok = [], True
    for r in (1.0, 1.5):
        K = bernoulli_difference_kernel(2 * r, 1, cutoff)
        table = block_norm_table(K, r, s_max, fit_range=(lo, hi))
        dom = table.dominant_slope_1inf
        tot = fit_log2_slope(*zip(*[(n, v) for n, v in table.level_maxima("total").items() if lo <= n <= hi]))
        ok &= dom is not None and abs(dom + 2 * r) <= 0.15
        parts.append(f"r={r}: dominant-group slope {dom:.3f} (target {-2 * r}), "
                     f"total-index slope {tot:.3f}, tail bound {K.tail_bound:.1e}")
    criterion(5, "block decay of F_2r(x-y) in (1, inf)", ok, "; ".join(parts))


RATIO_CONSTANT = 16.0


def test_c06_kernel_split(criterion):
    rng = np.random.default_rng(6)
    recon, support, ratios = 0.0, True, []
    for d in (1, 2):
        u, r = 1, 1.0
        n_max = 2 * u + 1 + 8
        K = bernoulli_difference_kernel(2 * r, d, 2 ** math.ceil(n_max / 2) - 1)
        split = split_kernel(K, u, r, n_max=n_max)
        recon = max(recon, as_poly(split.reconstruct()).max_abs_diff(as_poly(K)))
        ratios += list(split.bound_ratios().values())
        phi = random_polynomial(hyperbolic_cross(5, d), rng)
        b = image_functions(split, phi * 1e-3)
        support &= b.supports_in_cross()
    worst_image = 0.0
    for i in range(10):
        d = 1 + i % 2
        if i < 6:
            r = float(rng.uniform(1.0, 2.0))
            K = bernoulli_difference_kernel(2 * r, d, 31)
        else:
            r = 1.0
            freqs = rng.integers(-16, 17, size=(60, 2 * d))
            K = TrigPolynomial(2 * d, freqs, rng.standard_normal(60) + 1j * rng.standard_normal(60))
        split = split_kernel(K, 1, r, n_max=9, oversample=2)
        phi = random_polynomial(hyperbolic_cross(4, d), rng)
        scale = 1.0 / image_functions(split, phi * 1e-6).phi_norm1 * 1e-6
        b = image_functions(split, phi * scale)
        support &= b.supports_in_cross()
        worst_image = max([worst_image] + list(b.norm_ratios().values()))
    ok = recon < 1e-12 and support and worst_image <= 1 + 1e-6 and max(ratios) <= RATIO_CONSTANT
    criterion(6, "kernel split identities and level bounds", ok,
              f"reconstruction {recon:.1e}, supports in Q_n {support}, max image norm ratio {worst_image:.6f}, "
              f"level ratio range [{min(ratios):.3g}, {max(ratios):.3g}] <= {RATIO_CONSTANT}")


def test_c07_covering_oracles(criterion):
    rng = np.random.default_rng(7)
    ok, worst_gap = True, 0.0
    for _ in range(50):
        n = int(rng.integers(3, 21))
        inst = MetricInstance.from_points(rng.uniform(-1, 1, size=(n, int(rng.integers(1, 4)))), "sup")
        eps = float(rng.uniform(0.05, 0.8) * inst.diameter)
        exact = covering_exact(inst, eps).n_upper
        greedy = covering_greedy(inst, eps).n_upper
        pack = packing_number(inst, eps)
        ok &= pack <= exact <= greedy <= exact * (1 + math.log(20))
        perm = rng.permutation(n)
        ok &= covering_exact(inst.permuted(perm), eps).n_upper == exact
        worst_gap = max(worst_gap, greedy / exact)
    criterion(7, "packing <= exact <= greedy, permutation invariance", ok,
              f"50 instances, max greedy/exact {worst_gap:.2f}")


def test_c08_finite_dimensional_balls(criterion):
    ok, rows = True, []
    for n in (1, 2, 3):
        inst = discretized_cube(n, 15)
        for eps in (1.0, 0.5, 0.25):
            lo, hi = unit_ball_bounds(n, eps=eps)
            if inst.n <= 20:
                res = covering_exact(inst, eps)
                lower, upper = res.n_lower, res.n_upper
            else:
                lower, upper = packing_number(inst, eps), covering_greedy(inst, eps).n_upper
            ok &= lo <= lower <= upper <= hi
            rows.append(f"n={n} eps={eps}: [{lower},{upper}] in [{lo:g},{hi:g}]")
        slack = inst.meta["step"] / 2
        ks = range(0, min(3 * n, int(math.log2(inst.n))) + 1)
        for b in entropy_table(inst, ks):
            bound = 3 * 2.0 ** (-b.k / n)
            ok &= b.eps_upper <= bound * (1 + slack / bound)
    criterion(8, "finite-dimensional covering sandwich and entropy decay", ok, "; ".join(rows))


def test_c09_budget(criterion):
    rng = np.random.default_rng(0)
    ok, worst = True, 0.0
    for _ in range(20):
        beta = rng.uniform(0.1, 1.0)
        a = beta * (1 + rng.uniform(0, 4))
        u = int(rng.integers(1, 9))
        c = rng.uniform(0, 2)
        plan = budget_allocate(LevelClassSpec(a, 0, 1, c), EAProfile(0, beta, 1), u)
        ks = [k for _, k in plan.budgets]
        ok &= all(x >= y for x, y in zip(ks, ks[1:]))
        ok &= plan.total <= 4 * plan.D_u + (plan.n_max - plan.n0)
        worst = max(worst, plan.total / plan.D_u)
    worked = budget_allocate(LevelClassSpec(2, 0, 1, 0), EAProfile(0, 1, 1), u=2, D_u=8)
    ok &= worked.n0 == 5 and worked.k(7) == 4
    criterion(9, "budget sum bound, monotone budgets, worked k_7", ok,
              f"20 draws, max total/D_u {worst:.3f}, k_7 = {worked.k(7)}")


def test_c10_exponents(criterion):
    r = sp.Symbol("r", positive=True)
    targets = {(1, "inf"): (-2 * r, 2 * r), (2, "inf"): (-2 * r, 4 * r + sp.Rational(1, 2)),
               (2, "p"): (-2 * r, 4 * r)}
    ok, got = True, []
    for (d, t), want in targets.items():
        spec, prof = kernel_class_instantiation(d, t)
        pw, lp = predicted_exponents(spec, prof)["composed"]
        ok &= sp.simplify(pw - want[0]) == 0 and sp.simplify(lp - want[1]) == 0
        got.append(f"d={d}/{t}: ({pw}, {lp})")
    criterion(10, "predicted composite exponents", ok, "; ".join(got))


def _fmt(x):
    return "none" if x is None else f"{x:.3f}"


def test_c11_cloud_regime_shape(criterion):
    start = time.perf_counter()
    Q = hyperbolic_cross(4, 1)
    inst = ball_sampler(Q, 1, 2000, seed=2024)
    ks = list(range(0, 25))
    table = entropy_table(inst, ks)
    up = [b.eps_upper for b in table]
    lo = [b.eps_lower for b in table]
    monotone = all(x >= y for x, y in zip(up, up[1:])) and all(x >= y for x, y in zip(lo, lo[1:]))
    switch = 2 * len(Q)
    below = [(k, e) for k, e in zip(ks, up) if k < switch and e > 0]
    above = [(k, e) for k, e in zip(ks, up) if k >= switch and e > 0]
    s_below = fit_log2_slope(*zip(*below)) if len(below) >= 2 else None
    s_above = fit_log2_slope(*zip(*above)) if len(above) >= 2 else None
    # the same comparison with the switch read as 2^k = 2|Q_4| balls, for the record
    kb = math.log2(switch)
    early = [(k, e) for k, e in zip(ks, up) if k < kb and e > 0]
    late = [(k, e) for k, e in zip(ks, up) if k >= kb and e > 0]
    p_early, p_late = fit_log2_slope(*zip(*early)), fit_log2_slope(*zip(*late))
    elapsed = time.perf_counter() - start
    steeper = s_below is not None and s_above is not None and s_above < s_below
    ok = monotone and steeper and elapsed < 120
    criterion(11, "cloud entropy table monotone, steeper decay past k = 2|Q_4|", ok,
              f"monotone {monotone}; switch k={switch}; slope below {_fmt(s_below)}, above {_fmt(s_above)} "
              f"({len(above)} rows with eps > 0 past the switch, cloud collapses at k="
              f"{next(k for k, e in zip(ks, up) if e == 0)}); proxy split 2^k={switch}: "
              f"{p_early:.3f} then {p_late:.3f}; {elapsed:.1f}s")


CLI_RUNS = [
    ["kernel", "--family", "fejer", "--order", "8"],
    ["kernel", "--family", "bernoulli", "--a", "2", "--cutoff", "16", "--d", "2"],
    ["blocks", "--n", "6", "--d", "2"],
    ["certify", "--kernel", "bernoulli", "--a", "2", "--d", "1", "--r", "1", "--smax", "10"],
    ["decompose", "--r", "1", "--u", "1", "--d", "2", "--n", "9"],
    ["entropy", "exact", "--cube", "1", "--per-axis", "401", "--eps", "0.5", "--cap", "401"],
    ["entropy", "greedy", "--cube", "2", "--per-axis", "9", "--eps", "0.25"],
    ["entropy", "bracket", "--cube", "2", "--per-axis", "9", "--k", "0:5"],
    ["entropy", "ball", "--n", "4", "--count", "300", "--k", "0:8", "--seed", "7"],
    ["budget", "--a", "2", "--beta", "1", "--u", "2", "--Du", "8"],
    ["predict", "--d", "2", "--target", "inf"],
]


def test_c12_cli_determinism(criterion, tmp_path):
    table = tmp_path / "table.csv"
    table.write_text("k,eps\n" + "".join(f"{k},{k ** -1.5}\n" for k in range(2, 30)))
    runs = CLI_RUNS + [["rates", "--table", str(table), "--column", "eps", "--seed", "5"]]
    same, codes = True, []
    for i, argv in enumerate(runs):
        outs = []
        for rep in range(2):
            out = tmp_path / f"run{i}_{rep}"
            codes.append(main(argv + ["--out", str(out)]))
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same &= outs[0] == outs[1] and len(outs[0]) == 2
        summary = json.loads(next(v for k, v in outs[0].items() if k.endswith(".json")))
        csv = next(v for k, v in outs[0].items() if k.endswith(".csv")).decode()
        same &= f"# config_hash={summary['config_hash']}" in csv
    ok = same and all(c == 0 for c in codes)
    criterion(12, "repeated CLI runs are byte-identical", ok,
              f"{len(runs)} subcommand configs, all exit 0: {all(c == 0 for c in codes)}")
