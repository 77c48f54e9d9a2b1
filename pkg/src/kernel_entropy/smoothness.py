"""Mixed differences and H-class certification through dyadic block norms."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GridTooSmallError, PreconditionError, ResourceCapError
from .io import rows_to_csv
from .kernels import DifferenceKernel, apply_block
from .spectral import (Grid, TrigPolynomial, block_indices_upto, evaluate_on_grid,
                       norm_vector_Lq, parse_vector_exponent)

DEFAULT_MAX_GRID_POINTS = 2**24


@dataclass(frozen=True)
class ClassParams:
    """Smoothness vector ``a``, exponent vector ``q`` and difference order ``l``."""

    a: tuple[float, ...]
    q: tuple[float, ...]
    l: int

    def __post_init__(self):
        a = tuple(float(x) for x in np.atleast_1d(self.a))
        q = parse_vector_exponent(self.q, len(a))
        if any(x <= 0 for x in a):
            raise PreconditionError("smoothness entries must be positive")
        if not self.l > max(a):
            raise PreconditionError(f"difference order l={self.l} must exceed max(a)={max(a)}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "q", q)

    @property
    def v(self) -> int:
        return len(self.a)

    @classmethod
    def split2d(cls, r: float, d: int, q_x="1", q_y="inf", l: int | None = None) -> "ClassParams":
        """Class on ``2d`` variables: ``x`` group takes ``q_x``, ``y`` group ``q_y``."""
        qx = parse_vector_exponent(q_x, d)
        qy = parse_vector_exponent(q_y, d)
        l = l if l is not None else int(math.floor(r)) + 1
        return cls((r,) * (2 * d), qx + qy, l)

    def to_dict(self) -> dict:
        return {"a": list(self.a), "q": ["inf" if x == math.inf else x for x in self.q], "l": self.l}


def mixed_difference(f: TrigPolynomial, t: Sequence[float], l: int, e: Iterable[int]) -> TrigPolynomial:
    """``prod_{j in e} Delta_{t_j, j}^l f`` with forward differences.

    ``e`` holds 0-based axis indices; the empty set returns ``f``.  In
    coefficients each factor multiplies by ``(exp(i k_j t_j) - 1)^l``.
    """
    if l < 1:
        raise PreconditionError(f"difference order must be >= 1, got {l}")
    e = sorted(set(int(j) for j in e))
    if not e:
        return f
    t = np.asarray(t, dtype=float).reshape(f.dim)

    def mult(fr):
        out = np.ones(len(fr), dtype=np.complex128)
        for j in e:
            out *= (np.exp(1j * fr[:, j] * t[j]) - 1.0) ** l
        return out

    return f.apply_multiplier(mult)


@dataclass(frozen=True)
class BlockRow:
    s: tuple[int, ...]
    norm: float
    scaled_norm: float


@dataclass(frozen=True)
class MembershipCertificate:
    """Measured block norms of ``f`` and the smallest admissible constant.

    ``B_hat`` is the maximum of ``2^{(a,s)} ||A_s f||_q`` over the table and
    ``slope`` the least-squares slope of ``log2`` of the per-level maximum
    against ``||s||_1`` (``None`` with fewer than two nonzero levels).
    """

    params: ClassParams
    s_max: int
    B_hat: float
    slope: float | None
    table: tuple[BlockRow, ...]
    tail_bound: float = 0.0
    fit_range: tuple[int, int] = (1, 0)

    def level_maxima(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for row in self.table:
            n = sum(row.s)
            out[n] = max(out.get(n, 0.0), row.norm)
        return out

    def to_record(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "s_max": self.s_max,
            "B_hat": self.B_hat,
            "slope": self.slope,
            "fit_range": list(self.fit_range),
            "tail_bound": self.tail_bound,
            "blocks": [{"s": list(r.s), "norm": r.norm, "scaled_norm": r.scaled_norm} for r in self.table],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, indent=2)

    def to_csv(self, comments: Sequence[str] = ()) -> str:
        v = self.params.v
        header = [f"s{j + 1}" for j in range(v)] + ["norm", "scaled_norm"]
        return rows_to_csv(header, [list(r.s) + [r.norm, r.scaled_norm] for r in self.table], comments)


def fit_log2_slope(xs, ys) -> float | None:
    """Least-squares slope of ``log2 y`` against ``x`` over positive ``y``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = ys > 0
    if keep.sum() < 2 or np.unique(xs[keep]).size < 2:
        return None
    return float(np.polyfit(xs[keep], np.log2(ys[keep]), 1)[0])


def block_norm(block, q: Sequence[float], *, oversample: int = 8, grid: Grid | None = None,
               max_grid_points: int = DEFAULT_MAX_GRID_POINTS) -> float:
    """Vector ``L_q`` norm of a polynomial or difference kernel.

    For ``G(x - y)`` the nested norm over the ``x`` group is independent of
    ``y``, so only ``||G||_{q_x}`` on a d-variate grid is computed.
    """
    if isinstance(block, DifferenceKernel):
        poly = block.G
        q = tuple(q[: block.d])
    else:
        poly = block
    if len(poly) == 0:
        return 0.0
    if grid is None:
        grid = Grid.for_polynomial(poly, oversample)
        if grid.npoints > max_grid_points:
            raise ResourceCapError(f"grid {grid.sizes} exceeds {max_grid_points} points")
    elif not grid.resolves(poly.degree):
        raise GridTooSmallError(f"grid {grid.sizes} does not resolve block of degree {poly.degree}")
    return norm_vector_Lq(poly, q, values=evaluate_on_grid(poly, grid))


def _check_truncation(f, s_max: int, s_list):
    cutoff = getattr(f, "cutoff", None)
    if cutoff is None:
        return
    if isinstance(f, DifferenceKernel):
        # k and -k share block indices, so blocks with |s1_j - s2_j| > 1 vanish identically
        d = f.d
        s_list = [s for s in s_list if all(abs(s[j] - s[j + d]) <= 1 for j in range(d))]
    top = max((max(s) for s in s_list), default=0)
    if top >= 1 and cutoff < 2**top - 1:
        raise PreconditionError(
            f"kernel truncated at {cutoff} cannot resolve blocks up to index {top}; "
            f"need cutoff >= {2 ** top - 1}")


def certify_H(f, params: ClassParams, s_max: int, *, fit_range: tuple[int, int] | None = None,
              oversample: int = 8, grid: Grid | None = None,
              max_grid_points: int = DEFAULT_MAX_GRID_POINTS) -> MembershipCertificate:
    """Block-norm certificate for ``f`` over all ``||s||_1 <= s_max``."""
    dim = f.dim
    if dim != params.v:
        raise PreconditionError(f"params describe {params.v} variables, f has {dim}")
    if s_max < 0:
        raise PreconditionError("s_max must be >= 0")
    s_list = block_indices_upto(s_max, dim)
    _check_truncation(f, s_max, s_list)
    a = np.asarray(params.a)
    rows = []
    for s in s_list:
        nrm = block_norm(apply_block(f, s), params.q, oversample=oversample, grid=grid,
                         max_grid_points=max_grid_points)
        rows.append(BlockRow(tuple(s), nrm, float(2.0 ** float(a @ np.asarray(s))) * nrm))
    B_hat = max(r.scaled_norm for r in rows)
    lo, hi = fit_range if fit_range is not None else (1, s_max)
    cert = MembershipCertificate(params, s_max, B_hat, None, tuple(rows),
                                 float(getattr(f, "tail_bound", 0.0) or 0.0), (lo, hi))
    levels = {n: v for n, v in cert.level_maxima().items() if lo <= n <= hi}
    slope = fit_log2_slope(list(levels), list(levels.values()))
    return MembershipCertificate(params, s_max, B_hat, slope, tuple(rows), cert.tail_bound, (lo, hi))


def all_subsets(v: int) -> list[tuple[int, ...]]:
    return [e for r in range(1, v + 1) for e in itertools.combinations(range(v), r)]


def holder_check_direct(f: TrigPolynomial, params: ClassParams, t_samples,
                        subsets: Iterable[Sequence[int]] | None = None,
                        *, oversample: int = 8) -> float:
    """``max ||Delta_t^l(e) f||_q / prod_{j in e} |t_j|^{a_j}`` over the samples.

    A lower estimate of the best constant in the mixed-difference condition.
    """
    subsets = list(subsets) if subsets is not None else all_subsets(f.dim)
    grid = Grid.for_polynomial(f, oversample)
    a = np.asarray(params.a)
    best = 0.0
    for t in t_samples:
        t = np.broadcast_to(np.asarray(t, dtype=float), (f.dim,))
        for e in subsets:
            denom = float(np.prod(np.abs(t[list(e)]) ** a[list(e)]))
            if denom == 0:
                continue
            g = mixed_difference(f, t, params.l, e)
            if len(g) == 0:
                continue
            best = max(best, norm_vector_Lq(g, params.q, grid) / denom)
    return best
