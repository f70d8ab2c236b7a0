"""Outcome generation from the linear model and least-squares fitting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ERROR_KINDS = ("normal", "t", "chisq")


@dataclass(frozen=True)
class ErrorDistSpec:
    """Zero-mean error distribution with standard deviation ``sd``.

    ``"t"`` is a Student t with ``df`` > 2 rescaled to ``sd``; ``"chisq"`` a
    chi-square with ``df`` degrees of freedom shifted to mean zero and rescaled.
    """

    kind: str = "normal"
    sd: float = 0.3
    df: float | None = None

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"unknown error distribution {self.kind!r}")
        if self.sd < 0:
            raise ValueError("error sd must be non-negative")
        if self.kind == "t" and (self.df is None or self.df <= 2):
            raise ValueError("scaled t errors need df > 2 for a finite variance")
        if self.kind == "chisq" and (self.df is None or self.df < 1):
            raise ValueError("chi-square errors need df >= 1")

    @classmethod
    def normal(cls, sd):
        return cls("normal", float(sd))

    @classmethod
    def scaled_t(cls, df, sd):
        return cls("t", float(sd), float(df))

    @classmethod
    def shifted_chisq(cls, df, sd):
        return cls("chisq", float(sd), float(df))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "sd": self.sd}
        if self.df is not None:
            out["df"] = self.df
        return out


@dataclass(frozen=True)
class OgmSpec:
    """Coefficients (intercept first) and error distribution of the linear model."""

    beta: tuple
    error: ErrorDistSpec = ErrorDistSpec()

    def __post_init__(self):
        beta = tuple(float(b) for b in np.ravel(self.beta))
        if not np.all(np.isfinite(beta)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "beta", beta)

    @property
    def beta_array(self) -> np.ndarray:
        return np.asarray(self.beta)

    def to_dict(self) -> dict:
        return {"beta": list(self.beta), "error": self.error.to_dict()}


@dataclass
class LseFit:
    beta_hat: np.ndarray
    rank_deficient: bool


def standardized_errors(spec: ErrorDistSpec, size, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance, zero-mean draws of the error family in ``spec``."""
    if spec.kind == "normal":
        return rng.standard_normal(size)
    if spec.kind == "t":
        return rng.standard_t(spec.df, size) / np.sqrt(spec.df / (spec.df - 2))
    return (rng.chisquare(spec.df, size) - spec.df) / np.sqrt(2 * spec.df)


def sample_errors(spec: ErrorDistSpec, n, rng: np.random.Generator) -> np.ndarray:
    """Draw errors of shape ``n`` (an int or a shape tuple)."""
    return spec.sd * standardized_errors(spec, n, rng)


def generate_outcome(X: np.ndarray, ogm: OgmSpec, rng: np.random.Generator) -> np.ndarray:
    """``y = X @ beta + eps`` with ``eps`` drawn from ``ogm.error``."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != len(ogm.beta):
        raise ValueError(f"design has {X.shape[-1]} columns but beta has {len(ogm.beta)} entries")
    return X @ ogm.beta_array + sample_errors(ogm.error, X.shape[:-1], rng)


def fit_lse_batch(X: np.ndarray, Y: np.ndarray):
    """Least-squares fits for a stack of problems.

    ``X`` has shape ``(batch, n, k)`` and ``Y`` ``(batch, n)``.  Full-rank
    problems are solved through a QR factorization; the numerical rank comes
    from the singular values of R with tolerance ``s_max * max(n, k) * eps``.
    Rank-deficient problems get the minimum-norm solution and are flagged.

    Returns ``(coef, rank_deficient)`` with shapes ``(batch, k)``, ``(batch,)``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    batch, n, k = X.shape
    if n < k:
        raise ValueError(f"need at least as many rows ({n}) as columns ({k})")
    Q, R = np.linalg.qr(X)
    s = np.linalg.svd(R, compute_uv=False)
    tol = s[:, :1] * max(n, k) * np.finfo(float).eps
    deficient = np.any(s <= tol, axis=1)
    if deficient.any():
        R = R.copy()
        R[deficient] = np.eye(k)
    qty = np.einsum("bnk,bn->bk", Q, Y)
    coef = np.linalg.solve(R, qty[..., None])[..., 0]
    for b in np.flatnonzero(deficient):
        coef[b] = np.linalg.lstsq(X[b], Y[b], rcond=None)[0]
    return coef, deficient


def fit_lse(X: np.ndarray, y: np.ndarray) -> LseFit:
    """Least-squares coefficients of ``y`` on the columns of ``X``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be 2-d and y must have one entry per row of X")
    coef, deficient = fit_lse_batch(X[None], y[None])
    return LseFit(beta_hat=coef[0], rank_deficient=bool(deficient[0]))
