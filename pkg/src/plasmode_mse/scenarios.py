"""True scenarios and the catalog of assumed-model deviations.

A :class:`Truth` is a normal feature distribution with unit variances, all
coefficients equal to one and N(0, 0.3^2) errors.  A :class:`Deviation`
turns a truth into the DGP and OGM that a simulation study assumes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .dgp import (
    CorrelationSpec,
    DgpSpec,
    MarginalSpec,
    build_correlation_matrix,
    mixture_variance,
    resolve_underlying_covariance,
    second_half,
)
from .ogm import ErrorDistSpec, OgmSpec

TRUE_ERROR_SD = 0.3

# Outlying components of the two mixture deviations, (mean, variance).
MIXTURE_COMPONENTS = {"mixture_outlier": (0.0, 10.0), "mixture_bimodal": (3.0, 1.0)}

DGP_KINDS = (
    "correlation", "correlation_power", "mean_second_half", "mean_all",
    "variance_second_half", "variance_all", "mean_variance_all",
    "mixture_outlier", "mixture_bimodal", "lognormal", "bernoulli",
)
OGM_KINDS = ("coefficients", "error_sd", "error_t", "error_chisq")
COMBINED_KINDS = ("coefficients_and_correlation", "error_sd_and_correlation")
DEVIATION_KINDS = ("true_model",) + DGP_KINDS + OGM_KINDS + COMBINED_KINDS

# Deviation axes used for crossover: kind -> true reference value.
# Correlation references come from the truth itself.
CROSSOVER_REFERENCE = {
    "mean_second_half": 0.0,
    "variance_second_half": 1.0,
    "mixture_outlier": 0.0,
    "mixture_bimodal": 0.0,
}


@dataclass(frozen=True)
class Truth:
    """A true scenario: ``p`` N(0, 1) features with correlation ``correlation``."""

    name: str
    p: int
    n: int
    correlation: CorrelationSpec
    error_sd: float = TRUE_ERROR_SD

    def __post_init__(self):
        if self.n <= self.p + 1:
            raise ValueError(f"scenario {self.name}: need n > p + 1")

    def correlation_matrix(self) -> np.ndarray:
        return build_correlation_matrix(self.correlation, self.p)

    @property
    def base_rho(self) -> Optional[float]:
        """The scalar correlation parameter, or None for an estimated matrix."""
        return None if self.correlation.kind == "explicit" else self.correlation.rho

    def dgp(self) -> DgpSpec:
        return resolve_underlying_covariance([MarginalSpec.normal()] * self.p, self.correlation)

    def ogm(self) -> OgmSpec:
        return OgmSpec(np.ones(self.p + 1), ErrorDistSpec.normal(self.error_sd))

    def to_dict(self) -> dict:
        return {"name": self.name, "p": self.p, "n": self.n,
                "correlation": self.correlation.to_dict(), "error_sd": self.error_sd}


def _fixed(name, p, n, rho):
    return Truth(name, p, n, CorrelationSpec.fixed(rho))


BUILTIN_TRUTHS = {
    t.name: t
    for t in (
        _fixed("p2n100rho0.2", 2, 100, 0.2),
        _fixed("p2n50rho0.2", 2, 50, 0.2),
        _fixed("p2n100rho0.5", 2, 100, 0.5),
        _fixed("p10n100rho0.2", 10, 100, 0.2),
        _fixed("p10n50rho0.2", 10, 50, 0.2),
        _fixed("p50n100rho0.2", 50, 100, 0.2),
        Truth("p50n100rho0.2pow", 50, 100, CorrelationSpec.power_block(0.2, 10, 5)),
        Truth("p50n100rho0.5pow", 50, 100, CorrelationSpec.power_block(0.5, 10, 5)),
    )
}

# Scenarios whose correlation is estimated from a dataset, name -> (p, n).
DATASET_TRUTHS = {"quake": (3, 100), "wine_quality": (11, 100), "pol": (26, 100),
                  "Yolanda": (100, 200)}


def dataset_truth(name: str, correlation: np.ndarray, n: int) -> Truth:
    corr = np.asarray(correlation, dtype=float)
    return Truth(name, corr.shape[0], int(n), CorrelationSpec.explicit(corr))


def coefficient_vector(label: str, p: int) -> np.ndarray:
    """Assumed coefficient vectors I-IV (intercept first)."""
    if label == "I":
        return np.arange(p + 1) / p
    if label == "II":
        return np.full(p + 1, 0.05)
    if label == "III":
        return np.full(p + 1, 10.0)
    if label == "IV":
        return np.zeros(p + 1)
    raise ValueError(f"unknown coefficient vector {label!r}; expected I, II, III or IV")


Value = Union[float, str, None]


@dataclass(frozen=True)
class Deviation:
    """One assumed-model deviation from a truth.

    ``value`` is the swept parameter: a correlation, mean, variance, mixing
    proportion, success probability, error sd, degrees of freedom or a
    coefficient label.  ``blocks`` sets the block count of a power
    correlation; ``coefficients`` and ``error_sd`` carry the second half of
    a combined deviation; ``variance`` the variance of ``mean_variance_all``.
    """

    kind: str
    value: Value = None
    blocks: Optional[int] = None
    coefficients: Optional[str] = None
    error_sd: Optional[float] = None
    variance: Optional[float] = None

    def __post_init__(self):
        if self.kind not in DEVIATION_KINDS:
            raise ValueError(f"unknown deviation kind {self.kind!r}")
        if self.kind != "true_model" and self.value is None:
            raise ValueError(f"deviation {self.kind} needs a value")
        if self.kind == "coefficients_and_correlation" and self.coefficients is None:
            raise ValueError("coefficients_and_correlation needs a coefficient label")
        if self.kind == "error_sd_and_correlation" and self.error_sd is None:
            raise ValueError("error_sd_and_correlation needs an error sd")
        if self.kind == "mean_variance_all" and self.variance is None:
            raise ValueError("mean_variance_all needs a variance")

    @property
    def affects_dgp(self) -> bool:
        return self.kind in DGP_KINDS or self.kind in COMBINED_KINDS

    @property
    def affects_ogm(self) -> bool:
        return self.kind in OGM_KINDS or self.kind in COMBINED_KINDS

    @property
    def group(self) -> str:
        """Name of the sweep this deviation belongs to."""
        if self.kind == "correlation_power":
            return f"correlation_power[{self.blocks or 1}]"
        if self.kind == "coefficients_and_correlation":
            return f"coefficients_and_correlation[{self.coefficients}]"
        if self.kind == "error_sd_and_correlation":
            return f"error_sd_and_correlation[{self.error_sd:g}]"
        if self.kind == "mean_variance_all":
            return f"mean_variance_all[{self.variance:g}]"
        return self.kind

    @property
    def label(self) -> str:
        if self.kind == "true_model":
            return "true_model"
        return f"{self.group}={self.value:g}" if isinstance(self.value, float) else \
            f"{self.group}={self.value}"

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "value": self.value}
        for key in ("blocks", "coefficients", "error_sd", "variance"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Deviation":
        value = d.get("value")
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = float(value)
        return cls(
            kind=d["kind"], value=value,
            blocks=None if d.get("blocks") is None else int(d["blocks"]),
            coefficients=d.get("coefficients"),
            error_sd=None if d.get("error_sd") is None else float(d["error_sd"]),
            variance=None if d.get("variance") is None else float(d["variance"]),
        )

    # -- resolution -------------------------------------------------------

    def assumed_ogm(self, truth: Truth) -> OgmSpec:
        p = truth.p
        beta = np.ones(p + 1)
        error = ErrorDistSpec.normal(truth.error_sd)
        if self.kind == "coefficients":
            beta = coefficient_vector(str(self.value), p)
        elif self.kind == "coefficients_and_correlation":
            beta = coefficient_vector(self.coefficients, p)
        elif self.kind == "error_sd":
            error = ErrorDistSpec.normal(self.value)
        elif self.kind == "error_sd_and_correlation":
            error = ErrorDistSpec.normal(self.error_sd)
        elif self.kind == "error_t":
            error = ErrorDistSpec.scaled_t(self.value, truth.error_sd)
        elif self.kind == "error_chisq":
            error = ErrorDistSpec.shifted_chisq(self.value, truth.error_sd)
        return OgmSpec(beta, error)

    def assumed_correlation(self, truth: Truth):
        if self.kind in ("correlation", "coefficients_and_correlation",
                         "error_sd_and_correlation"):
            return CorrelationSpec.fixed(self.value)
        if self.kind == "correlation_power":
            blocks = self.blocks or 1
            if not 1 <= blocks <= truth.p:
                raise ValueError(f"cannot split {truth.p} features into {blocks} blocks")
            if truth.p % blocks == 0:
                return CorrelationSpec.power_block(self.value, truth.p // blocks, blocks)
            return CorrelationSpec.explicit(uneven_power_blocks(self.value, truth.p, blocks))
        return truth.correlation

    def assumed_marginals(self, truth: Truth) -> list:
        p = truth.p
        half = set(second_half(p))
        std = MarginalSpec.normal()
        k = self.kind
        v = self.value
        if k == "mean_second_half":
            return [MarginalSpec.normal(v, 1.0) if i in half else std for i in range(p)]
        if k == "mean_all":
            return [MarginalSpec.normal(v, 1.0)] * p
        if k == "variance_second_half":
            return [MarginalSpec.normal(0.0, v) if i in half else std for i in range(p)]
        if k == "variance_all":
            return [MarginalSpec.normal(0.0, v)] * p
        if k == "mean_variance_all":
            return [MarginalSpec.normal(v, self.variance)] * p
        if k in MIXTURE_COMPONENTS:
            mix = MarginalSpec.mixture(v, MIXTURE_COMPONENTS[k], (0.0, 1.0))
            matched = MarginalSpec.normal(mix.analytic_mean(), mix.analytic_variance())
            return [mix if i in half else matched for i in range(p)]
        if k == "lognormal":
            logn = MarginalSpec.lognormal(0.0, float(v))
            matched = MarginalSpec.normal(logn.analytic_mean(), logn.analytic_variance())
            return [logn if i in half else matched for i in range(p)]
        if k == "bernoulli":
            return [MarginalSpec.bernoulli(v) if i in half else std for i in range(p)]
        return [std] * p

    def resolve(self, truth: Truth) -> tuple:
        """``(assumed DgpSpec, assumed OgmSpec)`` for this deviation of ``truth``."""
        marginals = self.assumed_marginals(truth)
        corr = self.assumed_correlation(truth)
        return resolve_underlying_covariance(marginals, corr), self.assumed_ogm(truth)

    def crossover_reference(self, truth: Truth) -> Optional[float]:
        """True value of the swept parameter, or None when not on a crossover axis."""
        if self.kind in CROSSOVER_REFERENCE:
            return CROSSOVER_REFERENCE[self.kind]
        if self.kind in ("correlation", "correlation_power"):
            return truth.base_rho
        return None


TRUE_MODEL = Deviation("true_model")


def uneven_power_blocks(rho: float, p: int, blocks: int) -> np.ndarray:
    """``rho**|i-j|`` blocks whose sizes differ by at most one (larger blocks first)."""
    out = np.zeros((p, p))
    for idx in np.array_split(np.arange(p), blocks):
        block = rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)
        out[np.ix_(idx, idx)] = block
    return out


def matched_normal_moments(kind: str, value: float) -> tuple:
    """Mean and variance given to the first-half normals of a distribution deviation."""
    if kind in MIXTURE_COMPONENTS:
        comp = MIXTURE_COMPONENTS[kind]
        return (value * comp[0], mixture_variance(value, comp, (0.0, 1.0)))
    if kind == "lognormal":
        m = MarginalSpec.lognormal(0.0, value)
        return m.analytic_mean(), m.analytic_variance()
    raise ValueError(f"{kind} has no matched normal")
