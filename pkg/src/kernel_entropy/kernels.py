"""Classical periodic kernels and the operators built from them.

Every kernel is represented by its Fourier multiplier.  Convolution with a
kernel is the coefficient-wise product with that multiplier, so nothing in
this module uses grid quadrature.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import zeta

from .errors import PreconditionError
from .spectral import TrigPolynomial, lookup


# ---------------------------------------------------------------------------
# Univariate multipliers (vectorized over integer arrays)
# ---------------------------------------------------------------------------

def fejer_multiplier(j: int, k) -> np.ndarray:
    k = np.abs(np.asarray(k, dtype=float))
    return np.maximum(0.0, 1.0 - k / j)


def vdp_multiplier(m: int, k) -> np.ndarray:
    return 2.0 * fejer_multiplier(2 * m, k) - fejer_multiplier(m, k)


def a_block_multiplier(s: int, k) -> np.ndarray:
    """Fourier multiplier of the univariate block kernel A_s."""
    k = np.asarray(k)
    if s == 0:
        return (k == 0).astype(float)
    if s == 1:
        return vdp_multiplier(1, k) - (k == 0).astype(float)
    return vdp_multiplier(2 ** (s - 1), k) - vdp_multiplier(2 ** (s - 2), k)


def a_block_support(s: int) -> np.ndarray:
    """Frequencies where the univariate A_s multiplier can be nonzero."""
    if s == 0:
        return np.array([0])
    if s == 1:
        return np.array([-1, 1])
    pos = np.arange(2 ** (s - 2) + 1, 2**s)
    return np.concatenate([-pos[::-1], pos])


def multi_block_multiplier(s: Sequence[int], freqs: np.ndarray) -> np.ndarray:
    out = np.ones(len(freqs))
    for j, sj in enumerate(s):
        out = out * a_block_multiplier(int(sj), freqs[:, j])
    return out


def _tensor(axes: Sequence[tuple[np.ndarray, np.ndarray]]) -> TrigPolynomial:
    freqs = [a[0] for a in axes]
    vals = [a[1] for a in axes]
    fm = np.meshgrid(*freqs, indexing="ij")
    vm = np.meshgrid(*vals, indexing="ij")
    f = np.stack([m.ravel() for m in fm], axis=1)
    c = np.prod(np.stack([m.ravel() for m in vm], axis=0), axis=0)
    return TrigPolynomial(len(axes), f, c)


def _as_tuple(x) -> tuple:
    return tuple(x) if np.ndim(x) else (x,)


# ---------------------------------------------------------------------------
# Kernel constructors
# ---------------------------------------------------------------------------

def fejer(j) -> TrigPolynomial:
    """Fejer kernel with coefficients ``1 - |k|/j`` for ``|k| < j``.

    A sequence ``j`` gives the product kernel in ``len(j)`` variables.
    """
    axes = []
    for jj in _as_tuple(j):
        jj = int(jj)
        if jj < 1:
            raise PreconditionError(f"Fejer order must be >= 1, got {jj}")
        k = np.arange(-(jj - 1), jj)
        axes.append((k, fejer_multiplier(jj, k)))
    return _tensor(axes)


def vdp(m) -> TrigPolynomial:
    """de la Vallee Poussin kernel ``2 K_{2m} - K_m``."""
    axes = []
    for mm in _as_tuple(m):
        mm = int(mm)
        if mm < 1:
            raise PreconditionError(f"de la Vallee Poussin order must be >= 1, got {mm}")
        k = np.arange(-(2 * mm - 1), 2 * mm)
        axes.append((k, vdp_multiplier(mm, k)))
    return _tensor(axes)


def a_block_kernel(s: Sequence[int]) -> TrigPolynomial:
    axes = []
    for sj in _as_tuple(s):
        sj = int(sj)
        if sj < 0:
            raise PreconditionError(f"block index entries must be >= 0, got {sj}")
        k = a_block_support(sj)
        axes.append((k, a_block_multiplier(sj, k)))
    return _tensor(axes)


def bernoulli_coefficients(a: float, k) -> np.ndarray:
    k = np.asarray(k)
    out = np.ones(k.shape, dtype=np.complex128)
    nz = k != 0
    kk = np.abs(k[nz]).astype(float)
    out[nz] = kk ** (-a) * np.exp(-1j * a * np.pi / 2 * np.sign(k[nz]))
    return out


def bernoulli_tail_bound(a: float, cutoff: int) -> float:
    """Sup-norm bound ``2 N^(1-a) / (a-1)`` on the discarded tail."""
    if a <= 1:
        raise PreconditionError(f"sup-norm tail bound needs a > 1, got a={a}")
    return 2.0 * cutoff ** (1.0 - a) / (a - 1.0)


@dataclass(frozen=True)
class BernoulliKernel:
    """Truncated Bernoulli kernel with a certified sup-norm tail bound."""

    poly: TrigPolynomial
    a: tuple[float, ...]
    cutoff: int
    tail_bound: float


def bernoulli(a, cutoff: int, *, with_bound: bool = True) -> BernoulliKernel:
    """``1 + 2 sum_{k<=N} k^{-a} cos(kx - a pi/2)``, or its product over axes.

    For the product kernel the tail bound telescopes over the factors, using
    ``||F_a||_inf <= 1 + 2 zeta(a)``.
    """
    avec = tuple(float(x) for x in _as_tuple(a))
    if any(x <= 0 for x in avec):
        raise PreconditionError("Bernoulli smoothness must be positive")
    cutoff = int(cutoff)
    if cutoff < 1:
        raise PreconditionError(f"cutoff must be >= 1, got {cutoff}")
    k = np.arange(-cutoff, cutoff + 1)
    poly = _tensor([(k, bernoulli_coefficients(x, k)) for x in avec])
    tail = math.nan
    if with_bound:
        tails = [bernoulli_tail_bound(x, cutoff) for x in avec]
        full = [1 + 2 * float(zeta(x)) for x in avec]
        trunc = [1 + 2 * float(np.sum(np.arange(1, cutoff + 1, dtype=float) ** (-x))) for x in avec]
        tail = 0.0
        for j in range(len(avec)):
            tail += math.prod(full[:j]) * tails[j] * math.prod(trunc[j + 1:])
    return BernoulliKernel(poly, avec, cutoff, tail)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def apply_block(f, s: Sequence[int]):
    """``A_s(f) = A_s * f``.  Works on polynomials and difference kernels."""
    if isinstance(f, DifferenceKernel):
        return f.block(s)
    s = tuple(int(x) for x in s)
    if len(s) != f.dim:
        raise PreconditionError(f"block index has {len(s)} entries, polynomial has {f.dim} variables")
    return f.apply_multiplier(lambda fr: multi_block_multiplier(s, fr))


def convolve(kernel: TrigPolynomial, f: TrigPolynomial) -> TrigPolynomial:
    return f.convolve(kernel)


def block_sum(f: TrigPolynomial, n: int) -> TrigPolynomial:
    """``sum_{||s||_1 <= n} A_s(f)``, accumulated as one multiplier."""
    cand = _candidate_blocks(f.freqs)
    total = np.zeros(len(f))
    for choice, s, w in cand:
        total += np.where(s.sum(axis=1) <= n, w, 0.0)
    return TrigPolynomial._trusted(f.dim, f.freqs, f.coeffs * total)


def vdp_projection(f: TrigPolynomial, n: int) -> TrigPolynomial:
    """Hyperbolic-cross de la Vallee Poussin operator of order ``n``.

    Built from univariate kernels only: with ``V_j = vdp(2^(j-1))`` for
    ``j >= 1``, ``V_0`` the mean and ``V_{-1} = 0``, the multiplier is
    ``sum_j (V_j - V_{j-1})(k_1) P_{n-j}(k_2, ...)`` recursively; in one
    variable it is ``V_n``.
    """
    def v_uni(j, k):
        if j < 0:
            return np.zeros(k.shape)
        if j == 0:
            return (k == 0).astype(float)
        return vdp_multiplier(2 ** (j - 1), k)

    def proj(n, fr):
        if fr.shape[1] == 1:
            return v_uni(n, fr[:, 0])
        out = np.zeros(len(fr))
        for j in range(n + 1):
            out += (v_uni(j, fr[:, 0]) - v_uni(j - 1, fr[:, 0])) * proj(n - j, fr[:, 1:])
        return out

    return f.apply_multiplier(lambda fr: proj(n, fr))


def _axis_candidates(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # each |k| >= 2 meets exactly the blocks b and b+1, b = bit length of |k|
    a = np.abs(k)
    b = np.zeros_like(a)
    nz = a > 0
    b[nz] = np.floor(np.log2(a[nz])).astype(a.dtype) + 1
    first = b.copy()
    second = np.where(a >= 2, b + 1, -1)
    return first, second


def _candidate_blocks(freqs: np.ndarray):
    """Yield ``(choice, s, weight)`` over the <= 2^v block pieces of each row.

    ``s`` is an ``(m, v)`` array of block indices and ``weight`` the product
    of univariate A multipliers (zero where the piece does not exist).
    """
    m, v = freqs.shape
    firsts, seconds = zip(*(_axis_candidates(freqs[:, j]) for j in range(v)))
    for choice in range(2**v):
        s = np.empty((m, v), dtype=np.int64)
        w = np.ones(m)
        for j in range(v):
            pick_second = (choice >> j) & 1
            sj = seconds[j] if pick_second else firsts[j]
            valid = sj >= 0
            sj_safe = np.where(valid, sj, 0)
            s[:, j] = sj_safe
            wj = np.zeros(m)
            for val in np.unique(sj_safe[valid]):
                sel = valid & (sj_safe == val)
                wj[sel] = a_block_multiplier(int(val), freqs[sel, j])
            w = w * wj
        yield choice, s, w


def block_pieces(freqs: np.ndarray):
    """Flattened block decomposition of a frequency list.

    Returns ``(row, s, weight)`` arrays: frequency ``freqs[row[i]]`` contributes
    with multiplier ``weight[i]`` to block ``s[i]``; only nonzero weights are
    kept.  Summing the weights per row gives exactly 1.
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    rows, ss, ws = [], [], []
    for _, s, w in _candidate_blocks(freqs):
        keep = w != 0
        rows.append(np.nonzero(keep)[0])
        ss.append(s[keep])
        ws.append(w[keep])
    return np.concatenate(rows), np.concatenate(ss, axis=0), np.concatenate(ws)


@dataclass(frozen=True, eq=False)
class DifferenceKernel:
    """Kernel ``K(x, y) = G(x - y)`` stored through the d-variate ``G``.

    As a function of ``2d`` variables its coefficients sit at ``(k, -k)``
    with value ``G_k``; the first ``d`` variables are the ``x`` group.
    """

    G: TrigPolynomial
    tail_bound: float = 0.0
    cutoff: int | None = None

    @property
    def d(self) -> int:
        return self.G.dim

    @property
    def dim(self) -> int:
        return 2 * self.G.dim

    def joint_freqs(self) -> np.ndarray:
        return np.concatenate([self.G.freqs, -self.G.freqs], axis=1)

    def to_bivariate(self) -> TrigPolynomial:
        return TrigPolynomial(self.dim, self.joint_freqs(), self.G.coeffs)

    def block(self, s: Sequence[int]) -> "DifferenceKernel":
        s = tuple(int(x) for x in s)
        if len(s) != self.dim:
            raise PreconditionError(f"block index needs {self.dim} entries, got {len(s)}")
        d = self.d
        g = self.G.apply_multiplier(
            lambda fr: multi_block_multiplier(s[:d], fr) * multi_block_multiplier(s[d:], -fr))
        return DifferenceKernel(g, 0.0, self.cutoff)

    def __add__(self, other: "DifferenceKernel") -> "DifferenceKernel":
        return DifferenceKernel(self.G + other.G, self.tail_bound + other.tail_bound, self.cutoff)

    def __mul__(self, scalar) -> "DifferenceKernel":
        return DifferenceKernel(self.G * scalar, abs(scalar) * self.tail_bound, self.cutoff)

    __rmul__ = __mul__

    def translate(self, tau) -> "DifferenceKernel":
        """Shift of the ``x`` variables."""
        return DifferenceKernel(self.G.translate(tau), self.tail_bound, self.cutoff)


def bernoulli_difference_kernel(a: float, d: int, cutoff: int) -> DifferenceKernel:
    """``F_a(x - y)`` with ``x, y`` in ``T^d`` (same smoothness on every axis)."""
    bk = bernoulli((a,) * d, cutoff)
    return DifferenceKernel(bk.poly, bk.tail_bound, cutoff)


def integral_operator(K, phi: TrigPolynomial) -> TrigPolynomial:
    """``f(x) = int K(x, y) phi(y) dmu(y)`` by coefficient contraction.

    For a general kernel in ``2d`` variables, ``f_k = sum_l K_{k,l} phi_{-l}``;
    a :class:`DifferenceKernel` reduces to the multiplier ``G_k phi_k``.
    """
    if isinstance(K, DifferenceKernel):
        if K.d != phi.dim:
            raise PreconditionError(f"kernel acts on {K.d} variables, phi has {phi.dim}")
        return phi.convolve(K.G)
    if K.dim != 2 * phi.dim:
        raise PreconditionError(f"kernel has {K.dim} variables, expected {2 * phi.dim}")
    d = phi.dim
    if len(K) == 0:
        return TrigPolynomial.zero(d)
    c = K.coeffs * lookup(phi.freqs, phi.coeffs, -K.freqs[:, d:])
    return TrigPolynomial(d, K.freqs[:, :d], c)


# ---------------------------------------------------------------------------
# Structured kernel configuration
# ---------------------------------------------------------------------------

FAMILIES = ("fejer", "vdp", "bernoulli", "a_block", "difference", "bivariate")


@dataclass(frozen=True)
class KernelSpec:
    """Serializable kernel description: a family name plus parameters.

    ``difference`` wraps another spec in ``params["inner"]``; ``bivariate``
    reads a coefficient CSV with ``2d`` frequency columns from ``params["path"]``.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PreconditionError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        return cls(data["family"], dict(data.get("params", {})))

    def build(self):
        p = self.params
        d = int(p.get("d", 1))
        if self.family == "fejer":
            return fejer((int(p["j"]),) * d)
        if self.family == "vdp":
            return vdp((int(p["m"]),) * d)
        if self.family == "a_block":
            return a_block_kernel(p["s"])
        if self.family == "bernoulli":
            return bernoulli((float(p["a"]),) * d, int(p["cutoff"]),
                             with_bound=float(p["a"]) > 1)
        if self.family == "difference":
            inner = KernelSpec.from_dict(p["inner"]).build()
            if isinstance(inner, BernoulliKernel):
                return DifferenceKernel(inner.poly, inner.tail_bound, inner.cutoff)
            return DifferenceKernel(inner)
        from .io import read_coeff_csv
        return read_coeff_csv(p["path"])
