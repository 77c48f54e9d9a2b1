"""Splitting a kernel on ``T^d x T^d`` into low, mixed and level parts.

A block index on ``2d`` variables is written ``s = (s1, s2)`` with ``s1``
acting on ``x`` and ``s2`` on ``y``.  Blocks are routed to three disjoint
regions::

    part1   ||s1||_1 <= u
    part2   ||s1||_1 >  u,  ||s2||_1 <= u
    levels  ||s1||_1 >  u,  ||s2||_1 >  u,   grouped by n = ||s1||_1 + ||s2||_1

Levels start at ``n0 + 1`` with ``n0 = 2u + 1``.  Levels above ``n_max`` are
kept in ``remainder`` so the four pieces always sum to the input.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .io import rows_to_csv
from .kernels import DifferenceKernel, block_pieces, integral_operator
from .smoothness import DEFAULT_MAX_GRID_POINTS, block_norm, fit_log2_slope
from .spectral import (Grid, TrigPolynomial, evaluate_on_grid, hyperbolic_cross,
                       norm_Lq, norm_vector_Lq)


def _kernel_parts(K):
    """``(d, joint frequencies, base polynomial)`` for either kernel type."""
    if isinstance(K, DifferenceKernel):
        return K.d, K.joint_freqs(), K.G
    if K.dim % 2:
        raise PreconditionError(f"kernel needs an even number of variables, got {K.dim}")
    return K.dim // 2, K.freqs, K


def _rebuild(K, base: TrigPolynomial, row: np.ndarray, weight: np.ndarray):
    poly = TrigPolynomial(base.dim, base.freqs[row], base.coeffs[row] * weight)
    if isinstance(K, DifferenceKernel):
        return DifferenceKernel(poly, 0.0, K.cutoff)
    return poly


def _zero_like(K):
    if isinstance(K, DifferenceKernel):
        return DifferenceKernel(TrigPolynomial.zero(K.d), 0.0, K.cutoff)
    return TrigPolynomial.zero(K.dim)


def _poly(K) -> TrigPolynomial:
    return K.G if isinstance(K, DifferenceKernel) else K


def _q_1inf(d: int) -> tuple[float, ...]:
    return (1.0,) * d + (math.inf,) * d


@dataclass(frozen=True)
class Block:
    s1: tuple[int, ...]
    s2: tuple[int, ...]
    kernel: object

    @property
    def total(self) -> int:
        return sum(self.s1) + sum(self.s2)

    @property
    def dominant(self) -> int:
        return max(sum(self.s1), sum(self.s2))


def decompose_blocks(K, s_max: int | None = None) -> list[Block]:
    """All nonzero blocks ``A_s(K)``, optionally limited to ``||s||_1 <= s_max``."""
    d, joint, base = _kernel_parts(K)
    if len(base) == 0:
        return []
    row, s, w = block_pieces(joint)
    if s_max is not None:
        keep = s.sum(axis=1) <= s_max
        row, s, w = row[keep], s[keep], w[keep]
    uniq, inv = np.unique(s, axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
    out = []
    for b, sv in enumerate(uniq):
        idx = order[bounds[b]:bounds[b + 1]]
        ker = _rebuild(K, base, row[idx], w[idx])
        if len(_poly(ker)):
            out.append(Block(tuple(int(x) for x in sv[:d]), tuple(int(x) for x in sv[d:]), ker))
    return out


def level_bound_shape(n: int, r: float, d: int, u: int) -> float:
    """``2^{-rn} n^{2d-2} (n - 2u - 1)``."""
    return 2.0 ** (-r * n) * n ** (2 * d - 2) * (n - 2 * u - 1)


@dataclass(frozen=True)
class KernelSplit:
    u: int
    r: float
    d: int
    n0: int
    n_max: int
    part1: object
    part2: object
    levels: dict
    remainder: object
    level_norms: dict
    tail_bound: float = 0.0

    def reconstruct(self):
        total = self.part1 + self.part2 + self.remainder
        for n in sorted(self.levels):
            total = total + self.levels[n]
        return total

    def bound_ratios(self) -> dict[int, float]:
        return {n: self.level_norms[n] / level_bound_shape(n, self.r, self.d, self.u)
                for n in sorted(self.level_norms)}

    def summary_rows(self) -> list[tuple]:
        rows = []
        for n in range(self.n0 + 1, self.n_max + 1):
            nrm = self.level_norms.get(n, 0.0)
            shape = level_bound_shape(n, self.r, self.d, self.u)
            rows.append((n, nrm, shape, nrm / shape))
        return rows

    def summary_csv(self, comments: Sequence[str] = ()) -> str:
        return rows_to_csv(["n", "norm_1inf", "bound_shape", "ratio"], self.summary_rows(), comments)


def split_kernel(K, u: int, r: float, *, n_max: int | None = None, oversample: int = 8,
                 max_grid_points: int = DEFAULT_MAX_GRID_POINTS) -> KernelSplit:
    if u < 1:
        raise PreconditionError(f"u must be a positive integer, got {u}")
    d, joint, base = _kernel_parts(K)
    n0 = 2 * u + 1
    n_max = n0 + 10 if n_max is None else int(n_max)
    if len(base) == 0:
        z = _zero_like(K)
        return KernelSplit(u, r, d, n0, n_max, z, z, {}, z, {}, 0.0)
    row, s, w = block_pieces(joint)
    n1 = s[:, :d].sum(axis=1)
    n2 = s[:, d:].sum(axis=1)
    region1 = n1 <= u
    region2 = (n1 > u) & (n2 <= u)
    region3 = (n1 > u) & (n2 > u)
    level = n1 + n2
    part1 = _rebuild(K, base, row[region1], w[region1])
    part2 = _rebuild(K, base, row[region2], w[region2])
    rem = region3 & (level > n_max)
    remainder = _rebuild(K, base, row[rem], w[rem])
    levels, norms = {}, {}
    for n in range(n0 + 1, n_max + 1):
        sel = region3 & (level == n)
        if not sel.any():
            continue
        kn = _rebuild(K, base, row[sel], w[sel])
        if len(_poly(kn)) == 0:
            continue
        levels[n] = kn
        norms[n] = block_norm(kn, _q_1inf(d), oversample=oversample, max_grid_points=max_grid_points)
    tail = float(getattr(K, "tail_bound", 0.0) or 0.0)
    return KernelSplit(u, r, d, n0, n_max, part1, part2, levels, remainder, norms, tail)


def y_support(K) -> np.ndarray:
    """Distinct ``y`` frequencies of a kernel."""
    d, joint, base = _kernel_parts(K)
    if len(base) == 0:
        return np.zeros((0, d), dtype=np.int64)
    return np.unique(joint[:, d:], axis=0)


def s_u_proxy_dimension(split: KernelSplit) -> int:
    """Cardinality of the ``y`` spectrum of ``part2``."""
    return len(y_support(split.part2))


# ---------------------------------------------------------------------------
# Block norm tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockNormRow:
    s1: tuple[int, ...]
    s2: tuple[int, ...]
    norm_1inf: float
    norm_inf: float
    nikolskii_ratio: float


@dataclass(frozen=True)
class BlockNormTable:
    """Per-block ``(1, inf)`` and sup norms with fitted decay slopes.

    ``slope_*`` fit the per-level maximum against ``||s||_1``;
    ``dominant_slope_1inf`` fits against ``max(||s1||_1, ||s2||_1)`` over the
    dominant indices fully covered by the table.  Slopes are ``None`` when
    fewer than two levels are available.
    """

    rows: tuple[BlockNormRow, ...]
    s_max: int
    slope_1inf: float | None
    slope_inf: float | None
    dominant_slope_1inf: float | None
    nikolskii_max: float
    fit_range: tuple[int, int]

    def level_maxima(self, key: str = "total", which: str = "norm_1inf") -> dict[int, float]:
        out: dict[int, float] = {}
        for row in self.rows:
            n = sum(row.s1) + sum(row.s2) if key == "total" else max(sum(row.s1), sum(row.s2))
            out[n] = max(out.get(n, 0.0), getattr(row, which))
        return dict(sorted(out.items()))

    def to_csv(self, comments: Sequence[str] = ()) -> str:
        if not self.rows:
            return rows_to_csv(["norm_1inf", "norm_inf", "nikolskii_ratio"], [], comments)
        d = len(self.rows[0].s1)
        header = ([f"s1_{j + 1}" for j in range(d)] + [f"s2_{j + 1}" for j in range(d)]
                  + ["norm_1inf", "norm_inf", "nikolskii_ratio"])
        body = [list(r.s1) + list(r.s2) + [r.norm_1inf, r.norm_inf, r.nikolskii_ratio] for r in self.rows]
        return rows_to_csv(header, body, comments)


def block_norm_table(K, r: float, s_max: int, *, fit_range: tuple[int, int] | None = None,
                     oversample: int = 8,
                     max_grid_points: int = DEFAULT_MAX_GRID_POINTS) -> BlockNormTable:
    """Norms of every nonzero block with ``||s||_1 <= s_max``.

    The Nikol'skii ratio is ``||A_s K||_inf / (2^{||s||_1} ||A_s K||_{1,inf})``.
    """
    d, _, _ = _kernel_parts(K)
    cutoff = getattr(K, "cutoff", None)
    blocks = decompose_blocks(K, s_max)
    if cutoff is not None and blocks:
        top = max(max(b.s1 + b.s2) for b in blocks)
        if cutoff < 2**top - 1:
            raise PreconditionError(f"kernel truncated at {cutoff} cannot resolve block index {top}")
    q1 = _q_1inf(d)
    qinf = (math.inf,) * (2 * d)
    rows = []
    for b in blocks:
        n1 = block_norm(b.kernel, q1, oversample=oversample, max_grid_points=max_grid_points)
        ni = block_norm(b.kernel, qinf, oversample=oversample, max_grid_points=max_grid_points)
        ratio = ni / (2.0 ** b.total * n1) if n1 > 0 else math.nan
        rows.append(BlockNormRow(b.s1, b.s2, n1, ni, ratio))
    lo, hi = fit_range if fit_range is not None else (1, s_max)
    table = BlockNormTable(tuple(rows), s_max, None, None, None,
                           max((x.nikolskii_ratio for x in rows), default=math.nan), (lo, hi))
    tot1 = {n: v for n, v in table.level_maxima("total").items() if lo <= n <= hi}
    toti = {n: v for n, v in table.level_maxima("total", "norm_inf").items() if lo <= n <= hi}
    dom = {m: v for m, v in table.level_maxima("dominant").items() if lo <= m and 2 * m <= s_max}
    return BlockNormTable(table.rows, s_max,
                          fit_log2_slope(list(tot1), list(tot1.values())),
                          fit_log2_slope(list(toti), list(toti.values())),
                          fit_log2_slope(list(dom), list(dom.values())),
                          table.nikolskii_max, (lo, hi))


# ---------------------------------------------------------------------------
# Image functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImageBundle:
    """Images of a test function under the split parts, with measured norms.

    ``level_norms1[n]`` is ``||f_{n,u}||_1`` and ``level_bounds[n]`` the
    ``(1, inf)`` norm of ``K_{n,u}``, both on one shared quadrature grid.
    """

    phi: TrigPolynomial
    phi_norm1: float
    f1: TrigPolynomial
    f2: TrigPolynomial
    levels: dict
    level_norms1: dict
    level_bounds: dict
    sup_f1: float
    sup_f2: float
    sup_K1: float
    sup_K2: float

    def norm_ratios(self) -> dict[int, float]:
        return {n: (self.level_norms1[n] / self.level_bounds[n] if self.level_bounds[n] > 0 else 0.0)
                for n in self.levels}

    def supports_in_cross(self) -> bool:
        d = self.phi.dim
        for n, fn in self.levels.items():
            if not fn.support_within(hyperbolic_cross(n, d)):
                return False
        return True


def _degree(K) -> tuple[tuple[int, ...], tuple[int, ...]]:
    d, joint, base = _kernel_parts(K)
    if len(base) == 0:
        return (0,) * d, (0,) * d
    a = np.abs(joint).max(axis=0)
    return tuple(int(x) for x in a[:d]), tuple(int(x) for x in a[d:])


def _shared_grid(split: KernelSplit, phi: TrigPolynomial, oversample: int) -> tuple[Grid, Grid]:
    dx = [0] * split.d
    dy = [0] * split.d
    for K in list(split.levels.values()) + [split.part1, split.part2]:
        gx, gy = _degree(K)
        dx = [max(a, b) for a, b in zip(dx, gx)]
        dy = [max(a, b) for a, b in zip(dy, gy)]
    dphi = phi.degree
    # y nodes must integrate K(x, .) * phi exactly
    need_y = [b + c for b, c in zip(dy, dphi)]
    gx = Grid.for_degree(dx, oversample)
    gy = Grid.for_degree(need_y, 1)
    if isinstance(split.part1, DifferenceKernel):
        both = [max(a, b) for a, b in zip(gx.sizes, gy.sizes)]
        g = Grid(tuple(both))
        return g, g
    return gx, gy


def _one_inf_norm(K, gx: Grid, gy: Grid) -> float:
    if isinstance(K, DifferenceKernel):
        return norm_Lq(evaluate_on_grid(K.G, gx), 1) if len(K.G) else 0.0
    if len(K) == 0:
        return 0.0
    joint = Grid(gx.sizes + gy.sizes)
    return norm_vector_Lq(K, _q_1inf(len(gx.sizes)), values=evaluate_on_grid(K, joint))


def _sup(K, gx: Grid, gy: Grid) -> float:
    if isinstance(K, DifferenceKernel):
        return norm_Lq(evaluate_on_grid(K.G, gx), math.inf) if len(K.G) else 0.0
    if len(K) == 0:
        return 0.0
    return norm_Lq(evaluate_on_grid(K, Grid(gx.sizes + gy.sizes)), math.inf)


def image_functions(split: KernelSplit, phi: TrigPolynomial, *, oversample: int = 8) -> ImageBundle:
    """Apply every part of ``split`` to ``phi``.

    ``phi`` is normed on the ``y`` grid that integrates ``K(x, .) phi``
    exactly; on that grid the inequality ``||f_n||_1 <= ||K_n||_{1,inf}
    ||phi||_1`` holds for the discrete norms as well.
    """
    if phi.dim != split.d:
        raise PreconditionError(f"phi has {phi.dim} variables, kernel acts on {split.d}")
    gx, gy = _shared_grid(split, phi, oversample)
    phi_norm = norm_Lq(evaluate_on_grid(phi, gy), 1)
    if phi_norm > 1 + 1e-12:
        warnings.warn(f"||phi||_1 = {phi_norm:.6g} exceeds 1; scale phi by {1 / phi_norm:.6g}",
                      stacklevel=2)
    f1 = integral_operator(split.part1, phi)
    f2 = integral_operator(split.part2, phi)
    levels, n1, bounds = {}, {}, {}
    for n, Kn in split.levels.items():
        fn = integral_operator(Kn, phi)
        levels[n] = fn
        n1[n] = norm_Lq(evaluate_on_grid(fn, gx), 1) if len(fn) else 0.0
        bounds[n] = _one_inf_norm(Kn, gx, gy)

    def sup_poly(f):
        return norm_Lq(evaluate_on_grid(f, Grid.for_polynomial(f, oversample)), math.inf) if len(f) else 0.0

    return ImageBundle(phi, phi_norm, f1, f2, levels, n1, bounds, sup_poly(f1), sup_poly(f2),
                       _sup(split.part1, gx, gy), _sup(split.part2, gx, gy))
