"""Log-log rate fits ``eps(k) = C k^{-rho} (log2 k)^{lam}`` with base-2 logs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError

MIN_ROWS = 5


@dataclass(frozen=True)
class RateFit:
    C: float
    rho: float
    lam: float
    lam_mode: str
    residual: float
    k_range: tuple[float, float]
    rho_interval: tuple[float, float] | None
    n_rows: int

    def to_record(self) -> dict:
        return {
            "C": self.C, "rho": self.rho, "lam": self.lam, "lam_mode": self.lam_mode,
            "residual": self.residual, "k_range": list(self.k_range),
            "rho_interval": list(self.rho_interval) if self.rho_interval else None,
            "n_rows": self.n_rows,
        }


def _design(k, lam_mode, lam):
    lk = np.log2(k)
    if lam_mode == "free":
        return np.column_stack([np.ones_like(lk), -lk, np.log2(lk)]), np.zeros_like(lk)
    offset = lam * np.log2(lk) if lam != 0 else np.zeros_like(lk)
    return np.column_stack([np.ones_like(lk), -lk]), offset


def _solve(k, y, lam_mode, lam):
    X, offset = _design(k, lam_mode, lam)
    coef, *_ = np.linalg.lstsq(X, y - offset, rcond=None)
    resid = float(np.linalg.norm(X @ coef + offset - y))
    return coef, resid


def fit_rates(k, eps, lam_mode: str = "fixed", lam: float = 0.0, *, bootstrap: int = 200,
              seed: int = 0) -> RateFit:
    """Least squares on ``log2 eps`` against ``log2 k`` (and ``log2 log2 k``).

    With ``lam_mode="fixed"`` the log power is held at ``lam``.  Rows with
    ``eps <= 0`` are dropped before fitting.  The interval for ``rho`` is a
    95% percentile bootstrap over resampled rows.
    """
    k = np.asarray(k, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if k.shape != eps.shape or k.ndim != 1:
        raise PreconditionError("k and eps must be 1-d arrays of equal length")
    if lam_mode not in ("fixed", "free"):
        raise PreconditionError(f"lam_mode must be 'fixed' or 'free', got {lam_mode!r}")
    if np.any(np.diff(k) <= 0):
        raise PreconditionError("k must be strictly increasing")
    keep = eps > 0
    k, eps = k[keep], eps[keep]
    if len(k) < MIN_ROWS:
        raise PreconditionError(f"need at least {MIN_ROWS} rows with eps > 0, got {len(k)}")
    needs_loglog = lam_mode == "free" or lam != 0
    if np.any(k < 1) or (needs_loglog and np.any(k <= 1)):
        raise PreconditionError("k must be >= 1 (> 1 when a log power is fitted or fixed)")
    y = np.log2(eps)
    if np.ptp(y) == 0:
        raise PreconditionError("eps is constant; no rate to fit")
    coef, resid = _solve(k, y, lam_mode, lam)
    lam_hat = float(coef[2]) if lam_mode == "free" else float(lam)

    interval = None
    if bootstrap > 0:
        rng = np.random.default_rng(seed)
        rhos = []
        n = len(k)
        for _ in range(bootstrap):
            idx = np.sort(rng.integers(0, n, n))
            kk = k[idx]
            if np.unique(kk).size < (3 if lam_mode == "free" else 2):
                continue
            c, _ = _solve(kk, y[idx], lam_mode, lam)
            rhos.append(c[1])
        if rhos:
            lo, hi = np.percentile(rhos, [2.5, 97.5])
            interval = (float(lo), float(hi))
    return RateFit(float(2.0 ** coef[0]), float(coef[1]), lam_hat, lam_mode, resid,
                   (float(k[0]), float(k[-1])), interval, len(k))
