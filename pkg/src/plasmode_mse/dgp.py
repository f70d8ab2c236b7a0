"""Feature data-generating processes.

A DGP is a vector of marginal distributions plus a target correlation matrix.
Non-normal marginals are produced by transforming underlying normals:
Bernoulli by dichotomizing at the success-probability quantile, log-normal by
exponentiating, and Gaussian mixtures by picking one of two underlying normals
per row.  The covariance of the underlying normals is resolved pairwise so the
transformed features carry the requested correlations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr, ndtri

NORMAL = "normal"
BERNOULLI = "bernoulli"
LOGNORMAL = "lognormal"
MIXTURE = "mixture"

PSD_CLIP = 1e-10
GRID_STEP = 1e-4


class InfeasibleCorrelationError(ValueError):
    """A requested correlation cannot be produced by the transformation.

    ``attainable`` holds the (low, high) correlation range when it is known,
    ``pair`` the feature indices when raised during covariance assembly.
    """

    def __init__(self, message, attainable=None, pair=None):
        super().__init__(message)
        self.attainable = attainable
        self.pair = pair


class UnsupportedPairError(InfeasibleCorrelationError):
    """No covariance-matching rule exists for this pair of marginal kinds."""


# ---------------------------------------------------------------------------
# Correlation structures
# ---------------------------------------------------------------------------


@dataclass
class CorrelationSpec:
    """Target correlation structure of the features.

    kind is ``"fixed"`` (equal pairwise correlation), ``"power_block"``
    (``rho**|i-j|`` inside each of ``block_count`` diagonal blocks, zero across
    blocks) or ``"explicit"`` (a full correlation matrix).
    """

    kind: str
    rho: float = 0.0
    block_size: Optional[int] = None
    block_count: Optional[int] = None
    matrix: Optional[np.ndarray] = None

    @classmethod
    def fixed(cls, rho: float) -> "CorrelationSpec":
        return cls("fixed", rho=float(rho))

    @classmethod
    def power_block(cls, rho: float, block_size: int, block_count: int = 1) -> "CorrelationSpec":
        return cls("power_block", rho=float(rho), block_size=int(block_size),
                   block_count=int(block_count))

    @classmethod
    def explicit(cls, matrix) -> "CorrelationSpec":
        return cls("explicit", matrix=np.array(matrix, dtype=float))

    def to_dict(self) -> dict:
        if self.kind == "explicit":
            return {"kind": "explicit", "matrix": np.asarray(self.matrix).tolist()}
        if self.kind == "power_block":
            return {"kind": "power_block", "rho": self.rho,
                    "block_size": self.block_size, "block_count": self.block_count}
        return {"kind": "fixed", "rho": self.rho}


def build_correlation_matrix(spec: CorrelationSpec, p: int) -> np.ndarray:
    """Materialize ``spec`` as a ``p x p`` correlation matrix."""
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if spec.kind == "fixed":
        if not -1.0 <= spec.rho <= 1.0:
            raise ValueError(f"correlation {spec.rho} outside [-1, 1]")
        out = np.full((p, p), spec.rho, dtype=float)
        np.fill_diagonal(out, 1.0)
        return out
    if spec.kind == "power_block":
        if not -1.0 <= spec.rho <= 1.0:
            raise ValueError(f"correlation {spec.rho} outside [-1, 1]")
        size, count = spec.block_size, spec.block_count
        if size is None or count is None or size < 1 or count < 1:
            raise ValueError("power_block needs positive block_size and block_count")
        if size * count != p:
            raise ValueError(f"block_size*block_count = {size * count} does not match p = {p}")
        idx = np.arange(size)
        block = spec.rho ** np.abs(idx[:, None] - idx[None, :])
        out = np.zeros((p, p))
        for b in range(count):
            sl = slice(b * size, (b + 1) * size)
            out[sl, sl] = block
        return out
    if spec.kind == "explicit":
        m = np.asarray(spec.matrix, dtype=float)
        if m.shape != (p, p):
            raise ValueError(f"explicit matrix has shape {m.shape}, expected {(p, p)}")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ValueError("explicit correlation matrix is not symmetric")
        if not np.allclose(np.diag(m), 1.0, atol=1e-12):
            raise ValueError("explicit correlation matrix needs a unit diagonal")
        if np.any(np.abs(m) > 1.0 + 1e-12):
            raise ValueError("explicit correlation entries must lie in [-1, 1]")
        return (m + m.T) / 2
    raise ValueError(f"unknown correlation kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# Marginals
# ---------------------------------------------------------------------------


def mixture_variance(alpha, comp1, comp2, cross_term: str = "standard") -> float:
    """Variance of ``alpha*N(comp1) + (1-alpha)*N(comp2)``.

    Components are ``(mean, variance)`` pairs.  ``cross_term="standard"``
    uses alpha*(1-alpha)*(mu1-mu2)**2; ``"printed"`` uses the variant
    alpha*(1-alpha**2)*(mu1-mu2)**2 found in some derivations, kept only for
    comparison runs.
    """
    (m1, v1), (m2, v2) = comp1, comp2
    if cross_term == "standard":
        weight = alpha * (1 - alpha)
    elif cross_term == "printed":
        weight = alpha * (1 - alpha ** 2)
    else:
        raise ValueError(f"unknown cross_term {cross_term!r}")
    return alpha * v1 + (1 - alpha) * v2 + weight * (m1 - m2) ** 2


@dataclass(frozen=True)
class MarginalSpec:
    """One feature's marginal distribution.

    normal: ``mean``, ``variance``; bernoulli: ``prob``; lognormal: ``mean``
    and ``variance`` on the log scale; mixture: ``alpha`` is the weight of
    ``comp1``, each component a ``(mean, variance)`` pair.
    """

    kind: str = NORMAL
    mean: float = 0.0
    variance: float = 1.0
    prob: float = 0.5
    alpha: float = 0.0
    comp1: tuple = (0.0, 1.0)
    comp2: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.kind in (NORMAL, LOGNORMAL):
            if not self.variance > 0:
                raise ValueError(f"{self.kind} variance must be positive, got {self.variance}")
        elif self.kind == BERNOULLI:
            if not 0.0 < self.prob < 1.0:
                raise ValueError(f"bernoulli probability must lie in (0, 1), got {self.prob}")
        elif self.kind == MIXTURE:
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"mixing proportion must lie in [0, 1], got {self.alpha}")
            if not (self.comp1[1] > 0 and self.comp2[1] > 0):
                raise ValueError("mixture component variances must be positive")
            object.__setattr__(self, "comp1", (float(self.comp1[0]), float(self.comp1[1])))
            object.__setattr__(self, "comp2", (float(self.comp2[0]), float(self.comp2[1])))
        else:
            raise ValueError(f"unknown marginal kind {self.kind!r}")

    @classmethod
    def normal(cls, mean=0.0, variance=1.0):
        return cls(NORMAL, mean=float(mean), variance=float(variance))

    @classmethod
    def bernoulli(cls, prob):
        return cls(BERNOULLI, prob=float(prob))

    @classmethod
    def lognormal(cls, mean=0.0, variance=1.0):
        return cls(LOGNORMAL, mean=float(mean), variance=float(variance))

    @classmethod
    def mixture(cls, alpha, comp1, comp2):
        return cls(MIXTURE, alpha=float(alpha), comp1=tuple(comp1), comp2=tuple(comp2))

    @property
    def n_underlying(self) -> int:
        return 2 if self.kind == MIXTURE else 1

    def analytic_mean(self) -> float:
        if self.kind == NORMAL:
            return self.mean
        if self.kind == BERNOULLI:
            return self.prob
        if self.kind == LOGNORMAL:
            return float(np.exp(self.mean + self.variance / 2))
        return self.alpha * self.comp1[0] + (1 - self.alpha) * self.comp2[0]

    def analytic_variance(self, cross_term: str = "standard") -> float:
        if self.kind == NORMAL:
            return self.variance
        if self.kind == BERNOULLI:
            return self.prob * (1 - self.prob)
        if self.kind == LOGNORMAL:
            s2 = self.variance
            return float(np.expm1(s2) * np.exp(2 * self.mean + s2))
        return mixture_variance(self.alpha, self.comp1, self.comp2, cross_term)

    def to_dict(self) -> dict:
        if self.kind == NORMAL:
            return {"kind": NORMAL, "mean": self.mean, "variance": self.variance}
        if self.kind == BERNOULLI:
            return {"kind": BERNOULLI, "prob": self.prob}
        if self.kind == LOGNORMAL:
            return {"kind": LOGNORMAL, "mean": self.mean, "variance": self.variance}
        return {"kind": MIXTURE, "alpha": self.alpha, "comp1": list(self.comp1),
                "comp2": list(self.comp2)}


# ---------------------------------------------------------------------------
# Bivariate normal CDF
# ---------------------------------------------------------------------------


def _half_rule(npts):
    x, w = leggauss(npts)
    keep = x > 0
    return x[keep], w[keep]


_RULES = {3: _half_rule(6), 6: _half_rule(12), 10: _half_rule(20)}
_TWOPI = 2 * np.pi


def _bvn_upper(h, k, r):
    """P(Z1 > h, Z2 > k) for finite h, k and |r| < 1 (Genz's BVNU scheme).

    Single-integral Drezner-Wesolowsky form with Gauss-Legendre rules of
    6, 12 or 20 points depending on |r|, plus an asymptotic expansion for
    |r| >= 0.925.
    """
    h, k, r = np.broadcast_arrays(np.asarray(h, float), np.asarray(k, float), np.asarray(r, float))
    out = np.empty(h.shape)
    ar = np.abs(r)

    low = ar < 0.925
    for lg, sel in ((3, low & (ar < 0.3)), (6, low & (ar >= 0.3) & (ar < 0.75)), (10, low & (ar >= 0.75))):
        if not sel.any():
            continue
        x, w = _RULES[lg]
        hh, kk, rr = h[sel], k[sel], r[sel]
        hk = hh * kk
        hs = (hh * hh + kk * kk) / 2
        asr = np.arcsin(rr)
        acc = np.zeros(hh.shape)
        for xi, wi in zip(x, w):
            for sgn in (-1.0, 1.0):
                sn = np.sin(asr * (1 + sgn * xi) / 2)
                acc += wi * np.exp((sn * hk - hs) / (1 - sn * sn))
        out[sel] = acc * asr / (2 * _TWOPI) + ndtr(-hh) * ndtr(-kk)

    high = ~low
    if high.any():
        x, w = _RULES[10]
        hh, rr = h[high], r[high]
        kk = np.where(rr < 0, -k[high], k[high])
        hk = hh * kk
        a2 = (1 - rr) * (1 + rr)
        a = np.sqrt(a2)
        bs = (hh - kk) ** 2
        c = (4 - hk) / 8
        d = (12 - hk) / 16
        bvn = a * np.exp(-(bs / a2 + hk) / 2) * (1 - c * (bs - a2) * (1 - d * bs / 5) / 3 + c * d * a2 * a2 / 5)
        b = np.sqrt(bs)
        tail = np.exp(-hk / 2) * np.sqrt(_TWOPI) * ndtr(-b / a) * b * (1 - c * bs * (1 - d * bs / 5) / 3)
        bvn = bvn - np.where(hk > -160, tail, 0.0)
        half = a / 2
        for xi, wi in zip(x, w):
            for sgn in (-1.0, 1.0):
                xs = (half * (sgn * xi + 1)) ** 2
                rs = np.sqrt(1 - xs)
                expo = -(bs / xs + hk) / 2
                term = half * wi * np.exp(expo) * (np.exp(-hk * (1 - rs) / (2 * (1 + rs))) / rs
                                                  - (1 + c * xs * (1 + d * xs)))
                bvn = bvn + np.where(expo > -100, term, 0.0)
        bvn = -bvn / _TWOPI
        pos = rr > 0
        res = np.where(pos, bvn + ndtr(-np.maximum(hh, kk)), -bvn)
        res = np.where(~pos & (kk > hh), res + ndtr(kk) - ndtr(hh), res)
        out[high] = res
    return out


def bvn_cdf(h, k, r):
    """P(Z1 <= h, Z2 <= k) for a standard bivariate normal with correlation r.

    Vectorized over broadcastable inputs; absolute error below 1e-7 (in
    practice near machine precision).  Infinite limits and |r| = 1 are handled
    analytically.
    """
    h, k, r = np.broadcast_arrays(np.asarray(h, float), np.asarray(k, float), np.asarray(r, float))
    if np.any(np.abs(r) > 1) or np.any(np.isnan(r)):
        raise ValueError("correlation must lie in [-1, 1]")
    out = np.empty(h.shape)
    done = np.zeros(h.shape, bool)

    neg_inf = (h == -np.inf) | (k == -np.inf)
    out[neg_inf] = 0.0
    done |= neg_inf
    sel = ~done & (h == np.inf)
    out[sel] = ndtr(k[sel])
    done |= sel
    sel = ~done & (k == np.inf)
    out[sel] = ndtr(h[sel])
    done |= sel
    sel = ~done & (r == 1)
    out[sel] = ndtr(np.minimum(h[sel], k[sel]))
    done |= sel
    sel = ~done & (r == -1)
    out[sel] = np.maximum(0.0, ndtr(h[sel]) + ndtr(k[sel]) - 1)
    done |= sel
    rest = ~done
    if rest.any():
        out[rest] = _bvn_upper(-h[rest], -k[rest], r[rest])
    out = np.clip(out, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Pairwise covariance solvers
# ---------------------------------------------------------------------------


def bernoulli_pair_range(p1: float, p2: float) -> tuple:
    """Attainable correlation range of two Bernoulli variables (Frechet bounds)."""
    scale = np.sqrt(p1 * (1 - p1) * p2 * (1 - p2))
    lo = (max(0.0, p1 + p2 - 1) - p1 * p2) / scale
    hi = (min(p1, p2) - p1 * p2) / scale
    return float(lo), float(hi)


def solve_bernoulli_pair(p1: float, p2: float, rho: float) -> float:
    """Underlying normal correlation giving two dichotomized normals correlation ``rho``.

    Grid search over [-1, 1] in steps of 1e-4, picking the value whose joint
    probability P(Z1 <= u1, Z2 <= u2) is closest to the one implied by
    ``rho``; ties go to the smaller magnitude.
    """
    for pr in (p1, p2):
        if not 0.0 < pr < 1.0:
            raise ValueError(f"success probability must lie in (0, 1), got {pr}")
    lo, hi = bernoulli_pair_range(p1, p2)
    if rho < lo - 1e-12 or rho > hi + 1e-12:
        raise InfeasibleCorrelationError(
            f"correlation {rho} not attainable for Bernoulli({p1}), Bernoulli({p2}); "
            f"attainable range [{lo:.4f}, {hi:.4f}]", attainable=(lo, hi))
    n_steps = int(round(1.0 / GRID_STEP))
    grid = np.round(np.arange(-n_steps, n_steps + 1) * GRID_STEP, 4)
    u1, u2 = ndtri(p1), ndtri(p2)
    target = rho * np.sqrt(p1 * (1 - p1) * p2 * (1 - p2)) + p1 * p2
    gap = np.abs(bvn_cdf(u1, u2, grid) - target)
    best = np.flatnonzero(gap == gap.min())
    return float(grid[best[np.argmin(np.abs(grid[best]))]])


def solve_bernoulli_normal(prob: float, normal_variance: float, rho: float) -> float:
    """Covariance between a normal feature and the standard normal behind a Bernoulli.

    The Bernoulli is ``1(Z <= u_prob)``, which gives
    Cov = -sigma12 * phi(u_prob); solved for the target correlation.
    """
    if not 0.0 < prob < 1.0:
        raise ValueError(f"success probability must lie in (0, 1), got {prob}")
    if not normal_variance > 0:
        raise ValueError("normal variance must be positive")
    density = np.exp(-ndtri(prob) ** 2 / 2) / np.sqrt(2 * np.pi)
    sigma12 = -rho * np.sqrt(normal_variance * prob * (1 - prob)) / density
    if abs(sigma12) > np.sqrt(normal_variance) * (1 + 1e-12):
        bound = float(density / np.sqrt(prob * (1 - prob)))
        raise InfeasibleCorrelationError(
            f"correlation {rho} not attainable between normal and Bernoulli({prob}); "
            f"attainable range [{-bound:.4f}, {bound:.4f}]", attainable=(-bound, bound))
    return float(sigma12)


def lognormal_pair_range(var2: float, var3: float) -> tuple:
    s23 = np.sqrt(var2 * var3)
    denom = np.sqrt(np.expm1(var2) * np.expm1(var3))
    return float(np.expm1(-s23) / denom), float(np.expm1(s23) / denom)


def solve_lognormal_pair(var2: float, var3: float, rho: float) -> float:
    """Underlying covariance for two log-normals with correlation ``rho``.

    ``var2`` and ``var3`` are the log-scale variances; the log-scale means
    do not enter.
    """
    if not (var2 > 0 and var3 > 0):
        raise ValueError("log-scale variances must be positive")
    lo, hi = lognormal_pair_range(var2, var3)
    arg = rho * np.sqrt(np.expm1(var2) * np.expm1(var3)) + 1
    if arg <= 0:
        raise InfeasibleCorrelationError(
            f"correlation {rho} not attainable for log-normal pair; attainable range "
            f"[{lo:.4f}, {hi:.4f}]", attainable=(lo, hi))
    sigma23 = float(np.log(arg))
    if abs(sigma23) > np.sqrt(var2 * var3) * (1 + 1e-12):
        raise InfeasibleCorrelationError(
            f"correlation {rho} not attainable for log-normal pair; attainable range "
            f"[{lo:.4f}, {hi:.4f}]", attainable=(lo, hi))
    return sigma23


def solve_lognormal_normal(log_mean: float, log_variance: float, normal_variance: float,
                           rho: float) -> float:
    """Covariance between a normal feature and the normal behind a log-normal.

    Written with the log-scale mean to mirror the derivation; it cancels, so
    the value equals ``rho * sigma1 * sqrt(exp(log_variance) - 1)``.
    """
    if not (log_variance > 0 and normal_variance > 0):
        raise ValueError("variances must be positive")
    m2, s2 = log_mean, log_variance
    sigma12 = (rho * np.sqrt(normal_variance * np.expm1(s2) * np.exp(2 * m2 + s2))
               / np.exp(m2 + s2 / 2))
    implied = sigma12 / np.sqrt(normal_variance * s2)
    if abs(implied) > 1 + 1e-12:
        bound = float(np.sqrt(s2 / np.expm1(s2)))
        raise InfeasibleCorrelationError(
            f"correlation {rho} not attainable between normal and logN(., {s2}); "
            f"attainable range [{-bound:.4f}, {bound:.4f}]", attainable=(-bound, bound))
    return float(sigma12)


def solve_mixture_links(alpha1: float, comps1, rho: float, partner: str = "normal",
                        normal_variance: float = 1.0, alpha2: Optional[float] = None,
                        comps2=None, cross_term: str = "standard") -> float:
    """Common covariance linking a Gaussian mixture's component normals to a partner.

    The solution is not unique; every component of the mixture gets the same
    covariance with the partner (a plain normal, or every component of a
    second mixture).  ``partner="none"`` returns 0.  Because the mixing
    weights sum to one, the mixture-mixture value is ``rho*sqrt(v1*v2)``.
    """
    v1 = mixture_variance(alpha1, comps1[0], comps1[1], cross_term)
    if not v1 > 0:
        raise ValueError("mixture variance must be positive")
    if partner == "none":
        return 0.0
    if partner == "normal":
        if not normal_variance > 0:
            raise ValueError("normal variance must be positive")
        cov = rho * np.sqrt(normal_variance * v1)
        sds = [np.sqrt(normal_variance * c[1]) for c in comps1]
    elif partner == "mixture":
        if alpha2 is None or comps2 is None:
            raise ValueError("mixture partner needs alpha2 and comps2")
        v2 = mixture_variance(alpha2, comps2[0], comps2[1], cross_term)
        weights = alpha1 * alpha2 + (1 - alpha1) * alpha2 + alpha1 * (1 - alpha2) + (1 - alpha1) * (1 - alpha2)
        cov = rho * np.sqrt(v1 * v2) / weights
        sds = [np.sqrt(a[1] * b[1]) for a in comps1 for b in comps2]
    else:
        raise ValueError(f"unknown partner kind {partner!r}")
    worst = max(abs(cov) / s for s in sds)
    if worst > 1 + 1e-12:
        raise InfeasibleCorrelationError(
            f"correlation {rho} implies an underlying correlation of {worst:.4f} "
            "between mixture components and partner")
    return float(cov)


# ---------------------------------------------------------------------------
# Assembly and sampling
# ---------------------------------------------------------------------------


def nearest_psd(matrix: np.ndarray, floor: float = PSD_CLIP):
    """Clip negative eigenvalues of a symmetric matrix to ``floor``.

    Returns ``(matrix, repaired)``; the input comes back untouched when it is
    already positive semi-definite.
    """
    sym = (matrix + matrix.T) / 2
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() >= 0:
        return sym, False
    clipped = np.where(vals < 0, floor, vals)
    return (vecs * clipped) @ vecs.T, True


@dataclass
class DgpSpec:
    """A fully resolved feature distribution ready for sampling.

    ``column_map[i]`` lists the underlying normal columns feeding feature i
    (two for a mixture: first ``comp1`` then ``comp2``).
    """

    marginals: tuple
    target_correlation: np.ndarray
    underlying_covariance: np.ndarray
    underlying_mean: np.ndarray
    column_map: tuple
    psd_repaired: bool = False
    factor: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.factor is None:
            vals, vecs = np.linalg.eigh(self.underlying_covariance)
            if vals.min() < -1e-8 * max(1.0, abs(vals.max())):
                raise np.linalg.LinAlgError("underlying covariance is not positive semi-definite")
            self.factor = vecs * np.sqrt(np.clip(vals, 0.0, None))

    @property
    def p(self) -> int:
        return len(self.marginals)

    @property
    def all_normal(self) -> bool:
        return all(m.kind == NORMAL for m in self.marginals)

    def to_dict(self) -> dict:
        return {
            "marginals": [m.to_dict() for m in self.marginals],
            "target_correlation": np.asarray(self.target_correlation).tolist(),
            "underlying_covariance": np.asarray(self.underlying_covariance).tolist(),
            "psd_repaired": self.psd_repaired,
        }


def _pair_covariance(mi: MarginalSpec, mj: MarginalSpec, rho: float, cross_term: str):
    """Covariance between the underlying columns of features i and j.

    Returns a scalar applied to every (column of i, column of j) pair.
    """
    kinds = (mi.kind, mj.kind)
    if rho == 0:
        return 0.0
    if kinds == (NORMAL, NORMAL):
        return rho * np.sqrt(mi.variance * mj.variance)
    if kinds == (BERNOULLI, BERNOULLI):
        return solve_bernoulli_pair(mi.prob, mj.prob, rho)
    if kinds == (LOGNORMAL, LOGNORMAL):
        return solve_lognormal_pair(mi.variance, mj.variance, rho)
    if kinds == (MIXTURE, MIXTURE):
        return solve_mixture_links(mi.alpha, (mi.comp1, mi.comp2), rho, partner="mixture",
                                   alpha2=mj.alpha, comps2=(mj.comp1, mj.comp2),
                                   cross_term=cross_term)
    if NORMAL in kinds:
        normal, other = (mi, mj) if mi.kind == NORMAL else (mj, mi)
        if other.kind == BERNOULLI:
            return solve_bernoulli_normal(other.prob, normal.variance, rho)
        if other.kind == LOGNORMAL:
            return solve_lognormal_normal(other.mean, other.variance, normal.variance, rho)
        return solve_mixture_links(other.alpha, (other.comp1, other.comp2), rho,
                                   partner="normal", normal_variance=normal.variance,
                                   cross_term=cross_term)
    raise UnsupportedPairError(f"no covariance rule for a {mi.kind}-{mj.kind} pair")


def _link_mixture_components(cov: np.ndarray, mixtures: list, passes: int = 5) -> None:
    """Fill the within-mixture covariances of ``cov`` in place.

    Both components share one covariance vector ``c`` with the other columns.
    Setting their mutual covariance to ``c' S^+ c`` (``S`` the covariance of
    the other columns) leaves residuals that are uncorrelated, so the matrix
    stays PSD whenever each single link is feasible.  Several mixtures depend
    on each other, hence the fixed-point passes.
    """
    size = len(cov)
    for _ in range(passes if len(mixtures) > 1 else 1):
        for a, b in mixtures:
            others = [k for k in range(size) if k not in (a, b)]
            c = cov[a, others]
            w = 0.0
            if np.any(c):
                w = float(c @ np.linalg.pinv(cov[np.ix_(others, others)]) @ c)
            cov[a, b] = cov[b, a] = min(w, cov[a, a], cov[b, b])


def resolve_underlying_covariance(marginals: Sequence[MarginalSpec], target,
                                  cross_term: str = "standard") -> DgpSpec:
    """Assemble the underlying normal covariance for ``marginals``.

    ``target`` is a :class:`CorrelationSpec` or a correlation matrix.  The
    covariance between the two component normals of one mixture is free,
    since only one of them is observed per row; see
    :func:`_link_mixture_components`.  A non-PSD assembly is repaired by
    eigenvalue clipping and flagged.
    """
    marginals = tuple(marginals)
    p = len(marginals)
    if isinstance(target, CorrelationSpec):
        corr = build_correlation_matrix(target, p)
    else:
        corr = build_correlation_matrix(CorrelationSpec.explicit(target), p)

    column_map = []
    means, variances = [], []
    for m in marginals:
        start = len(means)
        if m.kind == MIXTURE:
            means += [m.comp1[0], m.comp2[0]]
            variances += [m.comp1[1], m.comp2[1]]
            column_map.append((start, start + 1))
        else:
            if m.kind == BERNOULLI:
                means.append(0.0)
                variances.append(1.0)
            else:
                means.append(m.mean)
                variances.append(m.variance)
            column_map.append((start,))

    cov = np.diag(np.asarray(variances, dtype=float))
    for i in range(p):
        for j in range(i + 1, p):
            try:
                c = _pair_covariance(marginals[i], marginals[j], float(corr[i, j]), cross_term)
            except InfeasibleCorrelationError as exc:
                raise type(exc)(f"features {i} and {j}: {exc}", attainable=exc.attainable,
                                pair=(i, j)) from exc
            for a in column_map[i]:
                for b in column_map[j]:
                    cov[a, b] = cov[b, a] = c

    mixtures = [cols for cols in column_map if len(cols) == 2]
    if mixtures:
        _link_mixture_components(cov, mixtures)
    repaired_cov, repaired = nearest_psd(cov)
    return DgpSpec(marginals=marginals, target_correlation=corr,
                   underlying_covariance=repaired_cov if repaired else cov,
                   underlying_mean=np.asarray(means, dtype=float),
                   column_map=tuple(column_map), psd_repaired=repaired)


def normal_dgp(mean, covariance) -> DgpSpec:
    """All-normal DGP with an arbitrary mean vector and covariance matrix."""
    cov = np.asarray(covariance, dtype=float)
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (cov.shape[0],))
    cov, repaired = nearest_psd(cov)
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    marginals = tuple(MarginalSpec.normal(m, v) for m, v in zip(mean, np.diag(cov)))
    return DgpSpec(marginals=marginals, target_correlation=corr, underlying_covariance=cov,
                   underlying_mean=np.array(mean, dtype=float),
                   column_map=tuple((i,) for i in range(len(mean))), psd_repaired=repaired)


def sample_designs(spec: DgpSpec, n: int, count: int, rng: np.random.Generator,
                   intercept: bool = True) -> np.ndarray:
    """Draw ``count`` design matrices of ``n`` rows, shape ``(count, n, p+1)``.

    Draw order within ``rng``: all underlying standard normals first, then
    the mixture selection uniforms.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    q = spec.underlying_covariance.shape[0]
    z = rng.standard_normal((count, n, q)) @ spec.factor.T
    z += spec.underlying_mean
    mixtures = [i for i, m in enumerate(spec.marginals) if m.kind == MIXTURE]
    pick = rng.random((count, n, len(mixtures))) if mixtures else None

    offset = 1 if intercept else 0
    out = np.empty((count, n, spec.p + offset))
    if intercept:
        out[..., 0] = 1.0
    mix_slot = 0
    for i, m in enumerate(spec.marginals):
        cols = spec.column_map[i]
        if m.kind == NORMAL:
            out[..., i + offset] = z[..., cols[0]]
        elif m.kind == BERNOULLI:
            out[..., i + offset] = (z[..., cols[0]] <= ndtri(m.prob)).astype(float)
        elif m.kind == LOGNORMAL:
            out[..., i + offset] = np.exp(z[..., cols[0]])
        else:
            first = pick[..., mix_slot] < m.alpha
            out[..., i + offset] = np.where(first, z[..., cols[0]], z[..., cols[1]])
            mix_slot += 1
    return out


def sample_design(spec: DgpSpec, n: int, rng: np.random.Generator,
                  intercept: bool = True) -> np.ndarray:
    """Draw one ``n x (p+1)`` design matrix whose first column is all ones."""
    return sample_designs(spec, n, 1, rng, intercept=intercept)[0]


def second_half(p: int) -> range:
    """Indices of the "second half" of ``p`` features (the second feature when p = 2)."""
    return range(p // 2, p)

