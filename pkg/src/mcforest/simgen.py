"""Synthetic primary/auxiliary study pairs with known effect surfaces.

Covariates are multivariate normal with unit variances and a common
pairwise correlation; treatment is assigned by a logistic model; outcomes
are Gaussian around a linear surface with a linear effect function

    tau(x) = base_effect + x . effect_modifiers,
    y      = x . prognostic + z * tau(x) + noise,   noise ~ N(0, 1).

Scenario presets span a 3x3 grid: the level of between-study
heterogeneity (how much the auxiliary effect-modifier pattern departs
from the primary's) crossed with the magnitude of the auxiliary
coefficients. The primary study uses the same coefficient block
everywhere; only the auxiliary block varies.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .data import StudyDataset
from .seeding import rng_for

HETEROGENEITY_LEVELS = ("none", "medium", "high")
MAGNITUDE_LEVELS = ("low", "mid", "high")
PS_REGIMES = ("common", "different")


@dataclass(frozen=True, eq=False)
class StudyCoefficients:
    """Coefficient block of one study's data-generating process."""

    effect_modifiers: np.ndarray   # per-covariate slope of tau(x)
    treatment_coef: float          # scale of the treatment-assignment logit
    base_effect: float             # intercept of tau(x)
    prognostic: np.ndarray         # per-covariate main effect on the outcome

    def __post_init__(self):
        object.__setattr__(self, "effect_modifiers", np.asarray(self.effect_modifiers, dtype=np.float64))
        object.__setattr__(self, "prognostic", np.asarray(self.prognostic, dtype=np.float64))

    def tau(self, X: np.ndarray) -> np.ndarray:
        """Ground-truth conditional effect at each row of X."""
        return self.base_effect + X @ self.effect_modifiers


def _padded(values, p: int) -> np.ndarray:
    out = np.zeros(p, dtype=np.float64)
    head = np.asarray(values, dtype=np.float64)
    out[: head.size] = head
    return out


# Auxiliary coefficient grid: (heterogeneity, magnitude) -> leading entries
# of (effect_modifiers, treatment_coef, base_effect, prognostic).
_AUX_GRID = {
    ("none", "low"): ((1.0,), 0.5, 0.5, (1.0, 1.0, 1.0)),
    ("none", "mid"): ((1.0,), 1.5, 1.5, (1.5, 1.5, 1.5)),
    ("none", "high"): ((1.0,), 2.0, 2.0, (2.0, 2.0, 2.0)),
    ("medium", "low"): ((0.25, 0.25, 0.25, 0.25), 0.5, 0.5, (1.0, 1.0, 1.0)),
    ("medium", "mid"): ((0.375, 0.375, 0.375, 0.375), 1.5, 1.5, (1.5, 1.5, 1.5)),
    ("medium", "high"): ((0.5, 0.5, 0.5, 0.5), 2.0, 2.0, (2.0, 2.0, 2.0)),
    ("high", "low"): ((0.0, 0.5, 0.5, 0.5), 0.5, 0.5, (1.0, 1.0, 1.0)),
    ("high", "mid"): ((0.0, 1.5, 1.5, 1.5), 1.5, 1.5, (1.5, 1.5, 1.5)),
    ("high", "high"): ((0.0, 2.0, 2.0, 2.0), 2.0, 2.0, (2.0, 2.0, 2.0)),
}

_PRIMARY_BLOCK = ((1.0,), 0.5, 0.5, (1.0, 1.0, 1.0))


@dataclass(frozen=True, eq=False)
class SimScenario:
    """One cell of the simulation grid, fully parameterized."""

    heterogeneity: str
    magnitude: str
    cov_rho: float
    ps_regime: str
    primary: StudyCoefficients
    auxiliary: StudyCoefficients
    n_primary: int = 500
    n_aux: int = 500
    p: int = 10
    center_quadratic: bool = True
    name: str | None = None

    @property
    def scenario_id(self) -> str:
        if self.name:
            return self.name
        regime = "diff" if self.ps_regime == "different" else "common"
        return f"{self.heterogeneity}-heterogeneity/{self.magnitude}/rho{self.cov_rho:g}/{regime}-ps"


def scenario_from_tables(heterogeneity: str, magnitude: str, cov_rho: float = 0.2,
                         ps_regime: str = "different", **overrides) -> SimScenario:
    """Scenario with coefficient blocks taken from the preset grid."""
    if heterogeneity not in HETEROGENEITY_LEVELS:
        raise ValueError(f"heterogeneity must be one of {HETEROGENEITY_LEVELS}")
    if magnitude not in MAGNITUDE_LEVELS:
        raise ValueError(f"magnitude must be one of {MAGNITUDE_LEVELS}")
    if ps_regime not in PS_REGIMES:
        raise ValueError(f"ps_regime must be one of {PS_REGIMES}")
    p = int(overrides.pop("p", 10))
    em, tc, be, prog = _PRIMARY_BLOCK
    primary = StudyCoefficients(_padded(em, p), tc, be, _padded(prog, p))
    em, tc, be, prog = _AUX_GRID[(heterogeneity, magnitude)]
    auxiliary = StudyCoefficients(_padded(em, p), tc, be, _padded(prog, p))
    return SimScenario(heterogeneity=heterogeneity, magnitude=magnitude, cov_rho=float(cov_rho),
                       ps_regime=ps_regime, primary=primary, auxiliary=auxiliary, p=p, **overrides)


_PRESET = re.compile(
    r"^(none|medium|high)-heterogeneity/(low|mid|high)/rho([0-9.]+)/(diff|common)-ps$"
)


def scenario_from_name(preset: str) -> SimScenario:
    """Parse preset ids like ``high-heterogeneity/mid/rho0.2/diff-ps``."""
    m = _PRESET.match(preset.strip())
    if not m:
        raise ValueError(f"unknown scenario preset {preset!r}")
    het, mag, rho, regime = m.groups()
    return scenario_from_tables(het, mag, float(rho), "different" if regime == "diff" else "common")


def equicorrelation_matrix(p: int, rho: float) -> np.ndarray:
    """Covariance with unit diagonal and ``rho`` on every off-diagonal."""
    return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))


def generate_covariates(n: int, p: int, cov_rho: float, rng: np.random.Generator) -> np.ndarray:
    """Draw n rows from N(0, Sigma) via the Cholesky factor of Sigma."""
    sigma = equicorrelation_matrix(p, cov_rho)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ValueError(f"equicorrelation matrix with rho={cov_rho}, p={p} is not positive definite") from None
    return rng.standard_normal((n, p)) @ chol.T


def treatment_probability(X: np.ndarray, scenario: SimScenario, study: str) -> np.ndarray:
    """P(Z=1 | x) under the study's assignment model.

    The primary study always uses logit = coef * x1. The auxiliary study
    uses the same form under the common regime; under the different regime
    its logit is coef * (x2^2 - 1 + x3 + x4), the quadratic centered at its
    mean so prevalence stays near one half (disable via
    ``scenario.center_quadratic`` for sensitivity runs).
    """
    X = np.asarray(X, dtype=np.float64)
    if study == "primary":
        return expit(scenario.primary.treatment_coef * X[:, 0])
    if study != "auxiliary":
        raise ValueError(f"study must be 'primary' or 'auxiliary', got {study!r}")
    coef = scenario.auxiliary.treatment_coef
    if scenario.ps_regime == "common":
        return expit(coef * X[:, 0])
    if X.shape[1] < 4:
        raise ValueError("the different-assignment regime needs at least 4 covariates")
    quad = X[:, 1] ** 2
    if scenario.center_quadratic:
        quad = quad - 1.0
    return expit(coef * (quad + X[:, 2] + X[:, 3]))


def assign_treatment(X: np.ndarray, scenario: SimScenario, study: str,
                     rng: np.random.Generator) -> np.ndarray:
    """Bernoulli treatment draws under the study's assignment model."""
    prob = treatment_probability(X, scenario, study)
    return (rng.random(prob.shape[0]) < prob).astype(np.float64)


def generate_outcome(X: np.ndarray, Z: np.ndarray, coeffs: StudyCoefficients,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian outcomes around the linear surface; returns (Y, tau_true)."""
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    tau = coeffs.tau(X)
    y = X @ coeffs.prognostic + Z * tau + rng.standard_normal(X.shape[0])
    return y, tau


@dataclass(frozen=True)
class GeneratedPair:
    """A primary study (label 0) and its auxiliary companion (label 1)."""

    primary: StudyDataset
    auxiliary: StudyDataset


def _generate_study(scenario: SimScenario, study: str, seed: int) -> StudyDataset:
    n = scenario.n_primary if study == "primary" else scenario.n_aux
    coeffs = scenario.primary if study == "primary" else scenario.auxiliary
    X = generate_covariates(n, scenario.p, scenario.cov_rho, rng_for(seed, study, "covariates"))
    Z = assign_treatment(X, scenario, study, rng_for(seed, study, "treatment"))
    Y, tau = generate_outcome(X, Z, coeffs, rng_for(seed, study, "outcome"))
    label = 0.0 if study == "primary" else 1.0
    return StudyDataset(X=X, Z=Z, Y=Y, S=np.full(n, label), tau_true=tau)


def generate_pair(scenario: SimScenario, seed: int) -> GeneratedPair:
    """Deterministically generate both studies from independent sub-streams."""
    return GeneratedPair(
        primary=_generate_study(scenario, "primary", seed),
        auxiliary=_generate_study(scenario, "auxiliary", seed),
    )


def _coeffs_to_dict(c: StudyCoefficients) -> dict:
    return {
        "effect_modifiers": c.effect_modifiers.tolist(),
        "treatment_coef": c.treatment_coef,
        "base_effect": c.base_effect,
        "prognostic": c.prognostic.tolist(),
    }


def scenario_to_dict(scenario: SimScenario) -> dict:
    return {
        "heterogeneity": scenario.heterogeneity,
        "magnitude": scenario.magnitude,
        "cov_rho": scenario.cov_rho,
        "ps_regime": scenario.ps_regime,
        "primary": _coeffs_to_dict(scenario.primary),
        "auxiliary": _coeffs_to_dict(scenario.auxiliary),
        "n_primary": scenario.n_primary,
        "n_aux": scenario.n_aux,
        "p": scenario.p,
        "center_quadratic": scenario.center_quadratic,
        "name": scenario.name,
    }


def scenario_from_dict(d: dict) -> SimScenario:
    def coeffs(block) -> StudyCoefficients:
        return StudyCoefficients(
            effect_modifiers=np.asarray(block["effect_modifiers"], dtype=np.float64),
            treatment_coef=float(block["treatment_coef"]),
            base_effect=float(block["base_effect"]),
            prognostic=np.asarray(block["prognostic"], dtype=np.float64),
        )

    return SimScenario(
        heterogeneity=d["heterogeneity"],
        magnitude=d["magnitude"],
        cov_rho=float(d["cov_rho"]),
        ps_regime=d["ps_regime"],
        primary=coeffs(d["primary"]),
        auxiliary=coeffs(d["auxiliary"]),
        n_primary=int(d.get("n_primary", 500)),
        n_aux=int(d.get("n_aux", 500)),
        p=int(d.get("p", 10)),
        center_quadratic=bool(d.get("center_quadratic", True)),
        name=d.get("name"),
    )


def save_scenario(scenario: SimScenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n", encoding="utf-8")


def load_scenario(path) -> SimScenario:
    return scenario_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def resolve_scenario(source: str) -> SimScenario:
    """Resolve a preset id or a path to a scenario JSON file."""
    if Path(source).exists():
        return load_scenario(source)
    return scenario_from_name(source)
