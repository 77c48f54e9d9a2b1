"""Covering, packing and entropy numbers of finite metric instances.

Covers use balls centered at instance points, so every reported cover size
and radius is an upper bound for covers with arbitrary centers.  Packings
are certified lower bounds: ``m`` points with pairwise distance ``> 2 eps``
force at least ``m`` balls of radius ``eps`` whatever the centers.

All ties are broken by the lowest point id, which keeps results
independent of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import PreconditionError, ResourceCapError
from .io import rows_to_csv
from .spectral import Grid, TrigPolynomial, evaluate_on_grid, norm_bracket, norm_Lq, parse_exponent

EXACT_CAP = 20
ENTROPY_K_CAP = 24
SAMPLER_COEFF_CAP = 512
# relative slack for ball membership on floating-point distances
RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class MetricInstance:
    """Points with a symmetric, nonnegative, zero-diagonal distance matrix."""

    dist: np.ndarray
    points: np.ndarray | None = None
    metric: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        D = np.asarray(self.dist, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise PreconditionError("distance matrix must be square")
        if np.any(D < 0) or np.any(np.diag(D) != 0) or not np.allclose(D, D.T, rtol=0, atol=1e-12):
            raise PreconditionError("distances must be symmetric, nonnegative with zero diagonal")
        D = 0.5 * (D + D.T)
        D.setflags(write=False)
        object.__setattr__(self, "dist", D)

    @classmethod
    def from_points(cls, points, metric: str = "sup", p: float = 2.0, meta: dict | None = None):
        """``sup``: max coordinate gap; ``lp``: ``(mean |a - b|^p)^(1/p)``."""
        X = np.asarray(points, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if metric == "sup":
            D = cdist(X, X, "chebyshev")
        elif metric == "lp":
            p = parse_exponent(p)
            if p == math.inf:
                D = cdist(X, X, "chebyshev")
            else:
                D = cdist(X, X, "minkowski", p=p) / X.shape[1] ** (1.0 / p)
        else:
            raise PreconditionError(f"unknown metric {metric!r}")
        np.fill_diagonal(D, 0.0)
        return cls(D, X, metric, dict(meta or {}))

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def one_center_radius(self) -> float:
        return float(self.dist.max(axis=1).min())

    def permuted(self, perm: Sequence[int]) -> "MetricInstance":
        perm = np.asarray(perm)
        pts = None if self.points is None else self.points[perm]
        return MetricInstance(self.dist[np.ix_(perm, perm)], pts, self.metric, dict(self.meta))

    def balls(self, eps: float) -> np.ndarray:
        return self.dist <= eps * (1 + RTOL) + 1e-15


@dataclass(frozen=True)
class CoveringResult:
    eps: float
    n_lower: int
    n_upper: int
    exact: bool
    centers: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_lower > self.n_upper:
            raise AssertionError(f"lower {self.n_lower} exceeds upper {self.n_upper}")


@dataclass(frozen=True)
class EntropyBracket:
    k: int
    eps_lower: float
    eps_upper: float
    method: str = "greedy+packing"


def greedy_cover(inst: MetricInstance, eps: float) -> list[int]:
    """Repeatedly take the point whose ball holds most uncovered points."""
    n = inst.n
    if n == 0:
        return []
    B = inst.balls(eps)
    counts = B.sum(axis=1).astype(np.int64)
    uncovered = np.ones(n, dtype=bool)
    centers = []
    while uncovered.any():
        c = int(np.argmax(counts))
        centers.append(c)
        newly = B[c] & uncovered
        uncovered &= ~newly
        counts -= B[:, newly].sum(axis=1)
    return centers


def _separated_greedy(inst: MetricInstance, threshold: float, strict: bool) -> list[int]:
    # scan in id order, keep points at distance > (or >=) threshold from all kept
    n = inst.n
    mind = np.full(n, np.inf)
    chosen = []
    for i in range(n):
        ok = mind[i] > threshold if strict else mind[i] >= threshold
        if ok:
            chosen.append(i)
            np.minimum(mind, inst.dist[i], out=mind)
    return chosen


def packing_number(inst: MetricInstance, eps: float) -> int:
    """Size of a greedy maximal set with pairwise distances ``> 2 eps``."""
    return len(_separated_greedy(inst, 2 * eps * (1 + RTOL), strict=True))


def covering_greedy(inst: MetricInstance, eps: float) -> CoveringResult:
    centers = greedy_cover(inst, eps)
    return CoveringResult(eps, packing_number(inst, eps), len(centers), False, tuple(centers))


def covering_exact(inst: MetricInstance, eps: float, cap: int = EXACT_CAP) -> CoveringResult:
    """Minimum number of point-centered ``eps``-balls, by branch and bound."""
    n = inst.n
    if n > cap:
        raise ResourceCapError(f"exact covering limited to {cap} points, instance has {n}")
    if n == 0:
        return CoveringResult(eps, 0, 0, True)
    B = inst.balls(eps)
    masks = [sum(1 << int(j) for j in np.nonzero(B[i])[0]) for i in range(n)]
    full = (1 << n) - 1
    incumbent = greedy_cover(inst, eps)
    best = [len(incumbent), list(incumbent)]
    # a strict 2 eps packing certifies optimality as soon as it is matched
    floor = packing_number(inst, eps)
    if floor == best[0]:
        return CoveringResult(eps, floor, floor, True, tuple(sorted(best[1])))
    covering_sets = [[i for i in range(n) if (masks[i] >> p) & 1] for p in range(n)]

    def search(uncovered: int, chosen: list[int]):
        if uncovered == 0:
            if len(chosen) < best[0]:
                best[0], best[1] = len(chosen), list(chosen)
            return
        left = uncovered.bit_count()
        widest = max((m & uncovered).bit_count() for m in masks)
        if len(chosen) + -(-left // widest) >= best[0]:
            return
        # branch on the uncovered point with the fewest covering centers
        p = min((q for q in range(n) if (uncovered >> q) & 1),
                key=lambda q: (len(covering_sets[q]), q))
        cands = sorted(covering_sets[p], key=lambda c: (-(masks[c] & uncovered).bit_count(), c))
        for c in cands:
            if best[0] == floor:
                return
            chosen.append(c)
            search(uncovered & ~masks[c], chosen)
            chosen.pop()

    search(full, [])
    return CoveringResult(eps, best[0], best[0], True, tuple(sorted(best[1])))


def farthest_point_order(inst: MetricInstance, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Farthest-point traversal from point 0.

    Returns the first ``count`` points and ``radii[i]``, the distance of the
    ``i``-th point to the earlier ones (``radii[0] = inf``).
    """
    n = inst.n
    count = min(count, n)
    order = np.empty(count, dtype=np.int64)
    radii = np.empty(count)
    mind = np.full(n, np.inf)
    cur = 0
    for i in range(count):
        order[i] = cur
        radii[i] = mind[cur]
        np.minimum(mind, inst.dist[cur], out=mind)
        cur = int(np.argmax(mind))
    return order, radii


def _pair_radii(inst: MetricInstance) -> np.ndarray:
    iu = np.triu_indices(inst.n, 1)
    return np.unique(np.concatenate([[0.0], inst.dist[iu]]))


def _min_pairwise(inst: MetricInstance, idx) -> float:
    idx = np.asarray(idx)
    sub = inst.dist[np.ix_(idx, idx)]
    return float(sub[np.triu_indices(len(idx), 1)].min())


def _upper(inst: MetricInstance, m: int, radii: np.ndarray, fp) -> float:
    # smallest candidate radius whose greedy cover uses <= m centers
    lo, hi = 0, len(radii) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if len(greedy_cover(inst, radii[mid])) <= m:
            hi = mid
        else:
            lo = mid + 1
    best = float(radii[hi])
    order, rad = fp
    if len(order) > m:
        # the first m traversal points cover within the next traversal radius
        best = min(best, float(rad[m]))
    return best


def _lower(inst: MetricInstance, m: int, radii: np.ndarray, fp) -> float:
    # largest half-separation of some (m+1)-point subset
    if m == 1:
        return inst.diameter / 2
    best = 0.0
    order, rad = fp
    if len(order) > m:
        best = _min_pairwise(inst, order[: m + 1]) / 2
    lo, hi = 0, len(radii) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if len(_separated_greedy(inst, radii[mid], strict=False)) >= m + 1:
            lo = mid
        else:
            hi = mid - 1
    chosen = _separated_greedy(inst, radii[lo], strict=False)
    if len(chosen) >= m + 1:
        best = max(best, _min_pairwise(inst, chosen[: m + 1]) / 2)
    return best


def entropy_bracket(inst: MetricInstance, k: int, *, _cache: dict | None = None) -> EntropyBracket:
    """Interval for the ``k``-th entropy number (``2^k`` balls) of the point set."""
    if k < 0 or k > ENTROPY_K_CAP:
        raise ResourceCapError(f"k must lie in [0, {ENTROPY_K_CAP}], got {k}")
    m = 2**k
    if m >= inst.n:
        return EntropyBracket(k, 0.0, 0.0)
    cache = _cache if _cache is not None else {}
    if "radii" not in cache:
        cache["radii"] = _pair_radii(inst)
    if "fp" not in cache or len(cache["fp"][0]) < min(inst.n, m + 1):
        cache["fp"] = farthest_point_order(inst, m + 1)
    radii, fp = cache["radii"], cache["fp"]
    lo = _lower(inst, m, radii, fp)
    hi = _upper(inst, m, radii, fp)
    return EntropyBracket(k, min(lo, hi), hi)


def entropy_table(inst: MetricInstance, ks: Sequence[int]) -> list[EntropyBracket]:
    """Brackets for several ``k``, tightened so both ends are nonincreasing in ``k``."""
    ks = sorted(set(int(k) for k in ks))
    cache = {"fp": farthest_point_order(inst, min(inst.n, 2 ** max(ks) + 1))} if ks else {}
    raw = [entropy_bracket(inst, k, _cache=cache) for k in ks]
    up = np.minimum.accumulate([b.eps_upper for b in raw])
    low = np.maximum.accumulate([b.eps_lower for b in raw][::-1])[::-1]
    return [EntropyBracket(b.k, float(min(l, u)), float(u), b.method) for b, l, u in zip(raw, low, up)]


def entropy_table_csv(table: Sequence[EntropyBracket], seed=None, comments: Sequence[str] = ()) -> str:
    rows = [(b.k, b.eps_lower, b.eps_upper, b.method, "" if seed is None else str(seed)) for b in table]
    return rows_to_csv(["k", "eps_lower", "eps_upper", "method", "seed"], rows, comments)


# ---------------------------------------------------------------------------
# Finite-dimensional balls
# ---------------------------------------------------------------------------

def unit_ball_bounds(n: int, eps: float | None = None, k: int | None = None) -> tuple[float, float]:
    """Closed-form bounds for the unit ball of an ``n``-dimensional normed space.

    With ``eps``: ``(eps^-n, (1 + 2/eps)^n)`` for the covering number.  With
    ``k``: ``(2^{-k/n}, 3 * 2^{-k/n})`` for the entropy number; the lower end
    follows from the covering lower bound.
    """
    if n < 1:
        raise PreconditionError("dimension must be >= 1")
    if (eps is None) == (k is None):
        raise PreconditionError("give exactly one of eps or k")
    if eps is not None:
        if not 0 < eps <= 1:
            raise PreconditionError(f"eps must lie in (0, 1], got {eps}")
        return eps ** (-n), (1 + 2 / eps) ** n
    return 2.0 ** (-k / n), 3.0 * 2.0 ** (-k / n)


mp1_bounds = unit_ball_bounds


def discretized_cube(n: int, per_axis: int) -> MetricInstance:
    """Grid points of ``[-1, 1]^n`` (unit ball of the sup norm) with the sup metric."""
    axis = np.linspace(-1.0, 1.0, per_axis)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return MetricInstance.from_points(pts, "sup", meta={"step": 2.0 / (per_axis - 1)})


def ball_sampler(Q: np.ndarray, q_ball, count: int, seed: int, *, target="inf",
                 oversample: int = 8, norm_oversample: int = 64) -> MetricInstance:
    """Random real polynomials on ``Q`` scaled to unit ``L_{q_ball}`` norm.

    Coefficients are standard normal with conjugate symmetry; each sample is
    divided by its quadrature norm on a grid oversampled ``norm_oversample``
    times.  Points are values on a shared grid oversampled ``oversample``
    times and the metric is the grid ``L_target`` norm.  ``meta`` records
    a rigorous norm bracket per sample and the seed.
    """
    Q = np.asarray(Q, dtype=np.int64)
    if len(Q) > SAMPLER_COEFF_CAP:
        raise ResourceCapError(f"frequency set has {len(Q)} > {SAMPLER_COEFF_CAP} elements")
    q_ball = parse_exponent(q_ball)
    target = parse_exponent(target)
    rng = np.random.default_rng(seed)
    dim = Q.shape[1]
    deg = tuple(int(x) for x in np.abs(Q).max(axis=0))
    norm_grid = Grid.for_degree(deg, norm_oversample)
    value_grid = Grid.for_degree(deg, oversample)
    pts = np.empty((count, value_grid.npoints))
    brackets = []
    for i in range(count):
        f = _gaussian_real(Q, rng)
        nrm = norm_Lq(evaluate_on_grid(f, norm_grid), q_ball)
        f = f * (1.0 / nrm)
        pts[i] = evaluate_on_grid(f, value_grid).real.ravel()
        brackets.append(norm_bracket(f, q_ball, norm_grid))
    meta = {"seed": seed, "q_ball": q_ball, "target": target, "grid": value_grid.sizes,
            "norm_grid": norm_grid.sizes, "norm_brackets": brackets, "dim": dim}
    metric = "sup" if target == math.inf else "lp"
    return MetricInstance.from_points(pts, metric, p=target, meta=meta)


def _gaussian_real(Q: np.ndarray, rng: np.random.Generator) -> TrigPolynomial:
    c = rng.standard_normal(len(Q)) + 1j * rng.standard_normal(len(Q))
    f = TrigPolynomial(Q.shape[1], Q, c)
    mirrored = TrigPolynomial(Q.shape[1], -f.freqs, np.conj(f.coeffs))
    return (f + mirrored) * 0.5
