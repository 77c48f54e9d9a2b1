"""Multilevel entropy budgets and predicted rate exponents.

A level class collects functions ``f = sum_{n > n0} f_n`` with ``f_n`` in a
subspace of dimension ``D_n`` and ``||f_n|| <= 2^{-an} n^b (n - n0)^{b'}``.
Level ``l`` receives ``k_l = [D_u 2^{mu (n0 - l)}]`` entropy bits with
``mu = (a - beta) / (2 beta)``.

Exponents are returned as sympy expressions so that symbolic smoothness
parameters such as ``r`` stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import sympy as sp

from .errors import PreconditionError


def _exact(x):
    # floats are read through their decimal repr so 0.5 becomes 1/2
    if isinstance(x, float):
        return sp.Rational(repr(x)) if math.isfinite(x) else sp.oo
    return sp.sympify(x)


@dataclass(frozen=True)
class EAProfile:
    """Per-level entropy profile ``n^alpha (D/k)^beta log(4D/k)^gamma`` then ``2^{-k/2D}``."""

    alpha: object
    beta: object
    gamma: object

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            object.__setattr__(self, name, _exact(getattr(self, name)))
        beta, gamma = self.beta, self.gamma
        if beta.is_number and not (0 < beta <= 1):
            raise PreconditionError(f"beta must lie in (0, 1], got {beta}")
        if gamma.is_number and gamma < 0:
            raise PreconditionError(f"gamma must be >= 0, got {gamma}")

    def bound(self, n: int, D: float, k: int) -> float:
        """Shape of the assumed entropy bound for the unit ball of level ``n``."""
        a, b, g = float(self.alpha), float(self.beta), float(self.gamma)
        if k <= 2 * D:
            return n**a * (D / (k + 1)) ** b * math.log(4 * D / (k + 1)) ** g
        return n**a * 2.0 ** (-k / (2 * D))


@dataclass(frozen=True)
class LevelClassSpec:
    a: object
    b: object
    b_prime: object
    c: object

    def __post_init__(self):
        for name in ("a", "b", "b_prime", "c"):
            object.__setattr__(self, name, _exact(getattr(self, name)))
        if self.c.is_number and self.c < 0:
            raise PreconditionError(f"c must be >= 0, got {self.c}")

    def dimension(self, n: int, u: int) -> float:
        """Dimension law ``D_n = 2^{n-u} n^c``."""
        return 2.0 ** (n - u) * float(n) ** float(self.c)


@dataclass(frozen=True)
class BudgetPlan:
    u: int
    n0: int
    mu: float
    D_u: float
    budgets: tuple[tuple[int, int], ...]
    total: int
    n_max: int
    predicted_power: object
    predicted_log_power: object

    @property
    def constant(self) -> float:
        """Measured ``total / D_u``."""
        return self.total / self.D_u

    def k(self, level: int) -> int:
        return dict(self.budgets).get(level, 0)

    def predicted_bound(self) -> float:
        """``k^{-2a} (log k)^{2ac+b+alpha}`` at ``k = [D_u]``."""
        k = math.floor(self.D_u)
        if k < 2:
            return math.nan
        return k ** float(self.predicted_power) * math.log(k) ** float(self.predicted_log_power)


def _floor(x: float) -> int:
    # integer part, robust to x landing a few ulps under an integer
    return int(math.floor(x * (1 + 1e-12)))


def budget_allocate(spec: LevelClassSpec, profile: EAProfile, u: int,
                    D_u: float | None = None) -> BudgetPlan:
    """Budgets ``k_l`` for every level ``l > n0`` until they reach zero.

    ``D_u`` defaults to ``2^u u^c``.
    """
    a, beta = float(spec.a), float(profile.beta)
    if not a > beta:
        raise PreconditionError(f"need a > beta for a summable budget, got a={a}, beta={beta}")
    if u < 1:
        raise PreconditionError(f"u must be >= 1, got {u}")
    n0 = 2 * u + 1
    mu = (a - beta) / (2 * beta)
    D = float(D_u) if D_u is not None else 2.0**u * float(u) ** float(spec.c)
    if D < 1:
        raise PreconditionError(f"D_u must be >= 1, got {D}")
    last = n0 + int(math.floor(math.log2(D) / mu)) + 1
    budgets = []
    for l in range(n0 + 1, last + 1):
        kl = _floor(D * 2.0 ** (mu * (n0 - l)))
        if kl == 0:
            break
        budgets.append((l, kl))
    n_max = budgets[-1][0] if budgets else n0
    ex = predicted_exponents(spec, profile)["multilevel"]
    return BudgetPlan(u, n0, mu, D, tuple(budgets), sum(k for _, k in budgets), n_max, ex[0], ex[1])


def predicted_exponents(spec: LevelClassSpec, profile: EAProfile, *,
                        include_level_power: bool = False) -> dict[str, tuple]:
    """Power and log power of the rate bounds.

    ``single_level``: single-sum class, ``k^{-a} (log k)^{ac+b+alpha}``.
    ``multilevel``: class starting at level ``n0``, ``k^{-2a} (log k)^{2ac+b+alpha}``
    with ``k = [D_u]``.
    ``composed``: the ``multilevel`` bound after substituting ``k = k' / log k'``,
    giving ``(-2a, 2a + 2ac + alpha)`` in ``k'``.  The level-count
    power ``b`` is left out of this composition unless
    ``include_level_power`` is set.
    """
    a, b, c, alpha = spec.a, spec.b, spec.c, profile.alpha
    t1 = (-a, sp.simplify(a * c + b + alpha))
    t2 = (-2 * a, sp.simplify(2 * a * c + b + alpha))
    inner = 2 * a * c + alpha + (b if include_level_power else 0)
    composed = (-2 * a, sp.simplify(2 * a + inner))
    return {"single_level": t1, "multilevel": t2, "composed": composed}


def kernel_class_instantiation(d: int, target: str = "inf", r=None, p=None):
    """Level class and entropy profile for kernels of smoothness ``r``.

    ``d = 1`` with sup-norm target: profile ``(0, 1, 1)``, ``c = 0``.
    ``d = 2`` with sup-norm target: ``(1/2, 1, 1)``, ``c = 1``.
    ``d = 2`` with ``L_p`` target: ``(0, 1 - 1/p, 1 - 1/p)``, ``c = 1``.
    Level norms carry ``a = r``, ``b = 2d - 2``, ``b' = 1``.
    """
    r = sp.Symbol("r", positive=True) if r is None else sp.sympify(r)
    if d == 1 and target == "inf":
        prof, c = EAProfile(0, 1, 1), 0
    elif d == 2 and target == "inf":
        prof, c = EAProfile(sp.Rational(1, 2), 1, 1), 1
    elif d == 2 and target == "p":
        p = sp.Symbol("p", positive=True) if p is None else sp.sympify(p)
        beta = 1 - 1 / p
        prof, c = EAProfile(0, beta, beta), 1
    else:
        raise PreconditionError(f"no instantiation for d={d}, target={target!r}")
    return LevelClassSpec(r, 2 * d - 2, 1, c), prof
