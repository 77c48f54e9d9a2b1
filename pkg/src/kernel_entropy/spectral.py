"""Frequency combinatorics, sparse trigonometric polynomials and grid norms.

Functions of ``v`` periodic variables on ``[0, 2*pi)^v`` are stored by their
Fourier coefficients.  All norms use the normalized measure
``(2*pi)^{-v} dx``, so a grid norm is a plain mean over nodes.

Value arrays produced by :func:`evaluate_on_grid` have one axis per variable,
axis ``j`` carrying ``x_{j+1}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import GridTooSmallError, PreconditionError

INF = math.inf


# ---------------------------------------------------------------------------
# Dyadic blocks and hyperbolic crosses
# ---------------------------------------------------------------------------

def _axis_block(s: int) -> np.ndarray:
    if s < 0:
        raise PreconditionError(f"block index entries must be >= 0, got {s}")
    if s == 0:
        return np.array([0], dtype=np.int64)
    pos = np.arange(2 ** (s - 1), 2**s, dtype=np.int64)
    return np.concatenate([-pos[::-1], pos])


def dyadic_block_indices(s: Sequence[int]) -> np.ndarray:
    """Frequencies of the dyadic block rho(s) as an ``(m, v)`` integer array.

    Coordinate ``j`` ranges over ``[2^(s_j - 1)] <= |k_j| < 2^s_j`` with the
    integer part taken literally, so ``s_j = 0`` contributes only ``k_j = 0``.
    """
    s = tuple(int(x) for x in s)
    if len(s) == 0:
        raise PreconditionError("block index must have at least one entry")
    axes = [_axis_block(sj) for sj in s]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def block_cardinality(s: Sequence[int]) -> int:
    return math.prod(1 if sj == 0 else 2 ** sj for sj in s)


def block_of(freqs: np.ndarray) -> np.ndarray:
    """The block index s with k in rho(s), computed row-wise."""
    a = np.abs(np.asarray(freqs, dtype=np.int64))
    out = np.zeros_like(a)
    nz = a > 0
    out[nz] = np.floor(np.log2(a[nz])).astype(np.int64) + 1
    return out


def block_indices_upto(n: int, d: int, *, min_norm: int = 0) -> list[tuple[int, ...]]:
    """All s in N_0^d with ``min_norm <= ||s||_1 <= n`` in lexicographic order."""
    if n < 0 or d < 1:
        raise PreconditionError("need n >= 0 and d >= 1")
    out = []
    for s in itertools.product(range(n + 1), repeat=d):
        if min_norm <= sum(s) <= n:
            out.append(s)
    return out


def hyperbolic_cross(n: int, d: int) -> np.ndarray:
    """The stepped hyperbolic cross Q_n as a sorted ``(|Q_n|, d)`` array.

    Blocks are pairwise disjoint, so the union is a concatenation; the rows
    are sorted lexicographically and the cardinality is ``len(result)``.
    """
    blocks = [dyadic_block_indices(s) for s in block_indices_upto(n, d)]
    allk = np.concatenate(blocks, axis=0)
    order = np.lexsort(allk.T[::-1])
    return allk[order]


# ---------------------------------------------------------------------------
# Sparse trigonometric polynomials
# ---------------------------------------------------------------------------

def _canonical(freqs: np.ndarray, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(freqs) == 0:
        return freqs, coeffs
    uniq, inv = np.unique(freqs, axis=0, return_inverse=True)
    summed = np.zeros(len(uniq), dtype=np.complex128)
    np.add.at(summed, inv.ravel(), coeffs)
    keep = summed != 0
    return uniq[keep], summed[keep]


def lookup(freqs: np.ndarray, coeffs: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Coefficients stored at ``query`` rows; zero where absent."""
    query = np.asarray(query, dtype=np.int64)
    if len(freqs) == 0 or len(query) == 0:
        return np.zeros(len(query), dtype=np.complex128)
    allf = np.concatenate([freqs, query], axis=0)
    _, inv = np.unique(allf, axis=0, return_inverse=True)
    inv = inv.ravel()
    pos = np.full(inv.max() + 1, -1, dtype=np.int64)
    pos[inv[: len(freqs)]] = np.arange(len(freqs))
    idx = pos[inv[len(freqs):]]
    out = np.zeros(len(query), dtype=np.complex128)
    hit = idx >= 0
    out[hit] = coeffs[idx[hit]]
    return out


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """Finite sum ``sum_k c_k exp(i (k, x))`` in ``dim`` variables.

    Rows of ``freqs`` are unique, sorted lexicographically, and carry nonzero
    coefficients.  Instances are immutable.
    """

    dim: int
    freqs: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=np.int64).reshape(-1, self.dim)
        c = np.asarray(self.coeffs, dtype=np.complex128).reshape(-1)
        if len(f) != len(c):
            raise PreconditionError("freqs and coeffs lengths differ")
        f, c = _canonical(f, c)
        f.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def _trusted(cls, dim, freqs, coeffs) -> "TrigPolynomial":
        # caller guarantees canonical order and uniqueness
        obj = object.__new__(cls)
        keep = coeffs != 0
        f = np.ascontiguousarray(freqs[keep])
        c = np.ascontiguousarray(coeffs[keep])
        f.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(obj, "dim", dim)
        object.__setattr__(obj, "freqs", f)
        object.__setattr__(obj, "coeffs", c)
        return obj

    # construction helpers
    @classmethod
    def zero(cls, dim: int) -> "TrigPolynomial":
        return cls(dim, np.zeros((0, dim), dtype=np.int64), np.zeros(0))

    @classmethod
    def constant(cls, dim: int, value: complex = 1.0) -> "TrigPolynomial":
        return cls(dim, np.zeros((1, dim), dtype=np.int64), [value])

    @classmethod
    def exponential(cls, k: Sequence[int], coeff: complex = 1.0) -> "TrigPolynomial":
        k = np.asarray(k, dtype=np.int64).reshape(1, -1)
        return cls(k.shape[1], k, [coeff])

    @classmethod
    def from_dict(cls, dim: int, mapping: dict) -> "TrigPolynomial":
        if not mapping:
            return cls.zero(dim)
        keys = np.array([tuple(k) if np.ndim(k) else (k,) for k in mapping], dtype=np.int64)
        return cls(dim, keys, list(mapping.values()))

    def to_dict(self) -> dict:
        return {tuple(int(x) for x in k): complex(c) for k, c in zip(self.freqs, self.coeffs)}

    # basic queries
    def __len__(self) -> int:
        return len(self.coeffs)

    def __repr__(self) -> str:
        return f"TrigPolynomial(dim={self.dim}, terms={len(self)})"

    @property
    def degree(self) -> tuple[int, ...]:
        """Per-axis maximum of ``|k_j|`` over the support."""
        if len(self) == 0:
            return (0,) * self.dim
        return tuple(int(x) for x in np.abs(self.freqs).max(axis=0))

    def coefficient(self, k: Sequence[int]) -> complex:
        return complex(lookup(self.freqs, self.coeffs, np.asarray(k).reshape(1, -1))[0])

    def coefficients_at(self, query: np.ndarray) -> np.ndarray:
        return lookup(self.freqs, self.coeffs, query)

    def support_within(self, allowed: np.ndarray) -> bool:
        """True when every stored frequency is a row of ``allowed``."""
        if len(self) == 0:
            return True
        marker = lookup(np.asarray(allowed, dtype=np.int64),
                        np.ones(len(allowed), dtype=np.complex128), self.freqs)
        return bool(np.all(marker != 0))

    def is_real(self, tol: float = 1e-12) -> bool:
        mirrored = lookup(self.freqs, self.coeffs, -self.freqs)
        return bool(np.all(np.abs(mirrored - np.conj(self.coeffs)) <= tol))

    # arithmetic
    def _check_dim(self, other: "TrigPolynomial"):
        if other.dim != self.dim:
            raise PreconditionError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        self._check_dim(other)
        return TrigPolynomial(self.dim, np.concatenate([self.freqs, other.freqs]),
                              np.concatenate([self.coeffs, other.coeffs]))

    def __neg__(self) -> "TrigPolynomial":
        return TrigPolynomial._trusted(self.dim, self.freqs, -self.coeffs)

    def __sub__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        return self + (-other)

    def __mul__(self, scalar) -> "TrigPolynomial":
        if isinstance(scalar, TrigPolynomial):
            return self.product(scalar)
        return TrigPolynomial._trusted(self.dim, self.freqs, self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def product(self, other: "TrigPolynomial") -> "TrigPolynomial":
        """Pointwise product (coefficient convolution)."""
        self._check_dim(other)
        if len(self) == 0 or len(other) == 0:
            return TrigPolynomial.zero(self.dim)
        f = (self.freqs[:, None, :] + other.freqs[None, :, :]).reshape(-1, self.dim)
        c = (self.coeffs[:, None] * other.coeffs[None, :]).reshape(-1)
        return TrigPolynomial(self.dim, f, c)

    def apply_multiplier(self, multiplier: Callable[[np.ndarray], np.ndarray]) -> "TrigPolynomial":
        """Coefficient-wise product ``c_k * m(k)``; ``m`` maps an ``(n, v)`` array to ``(n,)``."""
        if len(self) == 0:
            return self
        m = np.asarray(multiplier(self.freqs))
        return TrigPolynomial._trusted(self.dim, self.freqs, self.coeffs * m)

    def convolve(self, other: "TrigPolynomial") -> "TrigPolynomial":
        """Normalized convolution; Fourier coefficients multiply."""
        self._check_dim(other)
        theirs = lookup(other.freqs, other.coeffs, self.freqs)
        return TrigPolynomial._trusted(self.dim, self.freqs, self.coeffs * theirs)

    def translate(self, tau: Sequence[float]) -> "TrigPolynomial":
        """``x -> f(x + tau)``."""
        tau = np.asarray(tau, dtype=float).reshape(self.dim)
        phase = np.exp(1j * (self.freqs @ tau))
        return TrigPolynomial._trusted(self.dim, self.freqs, self.coeffs * phase)

    def restrict(self, mask_fn: Callable[[np.ndarray], np.ndarray]) -> "TrigPolynomial":
        keep = np.asarray(mask_fn(self.freqs), dtype=bool)
        return TrigPolynomial._trusted(self.dim, self.freqs[keep], self.coeffs[keep])

    def max_abs_diff(self, other: "TrigPolynomial") -> float:
        diff = self - other
        return float(np.abs(diff.coeffs).max()) if len(diff) else 0.0

    def __call__(self, x) -> np.ndarray:
        """Direct evaluation at points ``x`` of shape ``(..., dim)``."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        phase = np.tensordot(x, self.freqs.T.astype(float), axes=([-1], [0]))
        return np.exp(1j * phase) @ self.coeffs


# ---------------------------------------------------------------------------
# Grids and transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Equispaced tensor grid with nodes ``2*pi*j/M`` on each axis."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(m) for m in self.sizes)
        if not sizes or min(sizes) < 1:
            raise PreconditionError(f"grid sizes must be positive, got {self.sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def npoints(self) -> int:
        return math.prod(self.sizes)

    def nodes(self, axis: int) -> np.ndarray:
        m = self.sizes[axis]
        return 2 * np.pi * np.arange(m) / m

    def resolves(self, degree: Sequence[int]) -> bool:
        return all(m >= 2 * n + 1 for m, n in zip(self.sizes, degree))

    @classmethod
    def for_degree(cls, degree: Sequence[int], oversample: int = 8) -> "Grid":
        sizes = []
        for n in degree:
            need = max(2 * n + 1, oversample * n, 1)
            sizes.append(sfft.next_fast_len(need))
        return cls(tuple(sizes))

    @classmethod
    def for_polynomial(cls, f: TrigPolynomial, oversample: int = 8) -> "Grid":
        return cls.for_degree(f.degree, oversample)


def _check_resolved(f: TrigPolynomial, grid: Grid):
    if grid.dim != f.dim:
        raise PreconditionError(f"grid dimension {grid.dim} != polynomial dimension {f.dim}")
    if not grid.resolves(f.degree):
        raise GridTooSmallError(
            f"grid {grid.sizes} does not satisfy M_j >= 2*deg_j + 1 for degree {f.degree}")


def evaluate_on_grid(f: TrigPolynomial, grid: Grid) -> np.ndarray:
    """Values of ``f`` at all grid nodes, shape ``grid.sizes`` (complex)."""
    _check_resolved(f, grid)
    dense = np.zeros(grid.sizes, dtype=np.complex128)
    if len(f):
        idx = tuple(f.freqs[:, j] % grid.sizes[j] for j in range(f.dim))
        dense[idx] = f.coeffs
    return sfft.ifftn(dense, norm="forward")


def coefficients_from_values(values: np.ndarray, support: np.ndarray | None = None,
                             tol: float = 0.0) -> TrigPolynomial:
    """Inverse of :func:`evaluate_on_grid`.

    With ``support`` given, only those frequencies are read; otherwise every
    frequency in the centered range of the grid with ``|c| > tol`` is kept.
    """
    values = np.asarray(values)
    sizes = values.shape
    dim = len(sizes)
    dense = sfft.fftn(values, norm="forward")
    if support is None:
        axes = [np.arange(-((m - 1) // 2), m // 2 + 1) for m in sizes]
        mesh = np.meshgrid(*axes, indexing="ij")
        support = np.stack([m.ravel() for m in mesh], axis=1)
    support = np.asarray(support, dtype=np.int64).reshape(-1, dim)
    idx = tuple(support[:, j] % sizes[j] for j in range(dim))
    c = dense[idx]
    keep = np.abs(c) > tol
    return TrigPolynomial(dim, support[keep], c[keep])


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def parse_exponent(q) -> float:
    if isinstance(q, str):
        q = q.strip().lower()
        q = INF if q in ("inf", "infty", "infinity") else float(q)
    q = float(q)
    if not q >= 1:
        raise PreconditionError(f"norm exponent must be >= 1, got {q}")
    return q


def parse_vector_exponent(q, dim: int | None = None) -> tuple[float, ...]:
    """Accepts ``"1,inf"``, a scalar, or a sequence."""
    if isinstance(q, str):
        parts = [parse_exponent(p) for p in q.split(",")]
    elif np.ndim(q) == 0:
        parts = [parse_exponent(q)]
    else:
        parts = [parse_exponent(p) for p in q]
    if dim is not None:
        if len(parts) == 1:
            parts = parts * dim
        if len(parts) != dim:
            raise PreconditionError(f"exponent vector has {len(parts)} entries, need {dim}")
    return tuple(parts)


def _reduce_axis0(a: np.ndarray, q: float) -> np.ndarray:
    if q == INF:
        return a.max(axis=0)
    if q == 1:
        return a.mean(axis=0)
    return np.mean(a**q, axis=0) ** (1.0 / q)


def norm_Lq(values: np.ndarray, q) -> float:
    """``(mean |v|^q)^(1/q)`` over all nodes, or ``max |v|`` for ``q = inf``."""
    q = parse_exponent(q)
    a = np.abs(np.asarray(values)).ravel()
    return float(_reduce_axis0(a, q))


def norm_vector_Lq(f: TrigPolynomial, q, grid: Grid | None = None,
                   values: np.ndarray | None = None) -> float:
    """Nested norm, ``x_1`` innermost with ``q_1``, then ``x_2`` with ``q_2``, ..."""
    q = parse_vector_exponent(q, f.dim)
    if values is None:
        grid = grid or Grid.for_polynomial(f)
        values = evaluate_on_grid(f, grid)
    a = np.abs(values)
    for qj in q:
        a = _reduce_axis0(a, qj)
    return float(a)


def sup_bracket(f: TrigPolynomial, grid: Grid | None = None,
                values: np.ndarray | None = None) -> tuple[float, float]:
    """Interval containing the true sup-norm of ``f``.

    The grid maximum is a lower bound.  At a maximizer the gradient of the
    real part vanishes and Bernstein's inequality bounds the Hessian, so the
    nearest node loses at most a factor ``1 - (sum_j pi*N_j/M_j)^2 / 2``.
    """
    grid = grid or Grid.for_polynomial(f)
    if values is None:
        values = evaluate_on_grid(f, grid)
    lo = float(np.abs(values).max()) if values.size else 0.0
    h = sum(math.pi * n / m for n, m in zip(f.degree, grid.sizes))
    shrink = 1.0 - 0.5 * h * h
    hi = lo / shrink if shrink > 0 else INF
    return lo, hi


def norm_bracket(f: TrigPolynomial, q, grid: Grid | None = None) -> tuple[float, float]:
    """Interval containing the true normalized ``L_q`` norm of ``f``.

    ``q = 2`` is exact on a resolving grid.  For finite ``q != 2`` the
    rectangle-rule error of the Lipschitz function ``|f|^q`` is bounded with
    Bernstein's inequality; the interval is valid but not tight.
    """
    q = parse_exponent(q)
    grid = grid or Grid.for_polynomial(f)
    values = evaluate_on_grid(f, grid)
    s_lo, s_hi = sup_bracket(f, grid, values)
    if q == INF:
        return s_lo, s_hi
    est = norm_Lq(values, q)
    if q == 2:
        return est, est
    h = sum(math.pi * n / (2 * m) for n, m in zip(f.degree, grid.sizes))
    err = q * s_hi**q * h
    lo = max(est**q - err, 0.0) ** (1.0 / q)
    hi = min((est**q + err) ** (1.0 / q), s_hi)
    return lo, hi


def random_polynomial(freqs: np.ndarray, rng: np.random.Generator, *, real: bool = True,
                      scale: float = 1.0) -> TrigPolynomial:
    """Coefficients uniform in ``[-scale, scale]`` (real and imaginary parts).

    With ``real=True`` the result satisfies ``c_{-k} = conj(c_k)``; ``freqs``
    must then be symmetric under ``k -> -k``.
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    dim = freqs.shape[1]
    c = rng.uniform(-scale, scale, len(freqs)) + 1j * rng.uniform(-scale, scale, len(freqs))
    f = TrigPolynomial(dim, freqs, c)
    if not real:
        return f
    mirrored = TrigPolynomial._trusted(dim, f.freqs, np.conj(lookup(f.freqs, f.coeffs, -f.freqs)))
    return (f + mirrored) * 0.5


def union_frequencies(sets: Iterable[np.ndarray]) -> np.ndarray:
    stacked = np.concatenate([np.asarray(s, dtype=np.int64) for s in sets], axis=0)
    return np.unique(stacked, axis=0)
