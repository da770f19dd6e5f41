"""Synthetic loan-decision generator with a known ground-truth causal model.

Eight columns: gender G and age A (sensitive), education E, income I and
savings S_sav (covariates), loan amount L and duration D (treatments), and
repayment Y (outcome, 1 = repaid). The structural equations are fixed; the
config chooses the interaction strengths and one of two outcome forms:

* ``noisy``          — Y = 1{ arg + U_Y * gamma * (1 - G) >= 0 }
* ``deterministic``  — Y = 1{ sigmoid(arg) >= 0.5 + gamma * (1 - G) }

with arg = delta * (-L - D) + 0.3 * (I + S + alpha * I * S) and alpha = 1
when both income and savings are positive, else -1. Both forms penalize
G = 0 rows: the noisy one through a group-scaled noise term, the
deterministic one through a raised acceptance threshold.

``delta = 1`` with the noisy outcome gives a dataset roughly balanced in
gender and label; ``delta = 2`` with the deterministic outcome skews the
labels toward default.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import expit, logit

from .errors import SchemaError
from .schema import (
    BINARY,
    COVARIATE,
    OUTCOME,
    SENSITIVE,
    TREATMENT,
    Column,
    Dataset,
    FeatureSchema,
)
from .scm import (
    ContinuousMechanism,
    NoiseSpec,
    RootMechanism,
    Scm,
    ThresholdMechanism,
    sample,
)

VARIANTS = ("noisy", "deterministic")


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic generator.

    ``eta`` is part of the published parameterization but enters no equation;
    it is recorded for provenance and deliberately unused.
    """

    beta: float = 0.03
    gamma: float = 0.5
    delta: float = 1.0
    eta: float = 5.0
    n: int = 5000
    seed: int = 0
    outcome_variant: str = "noisy"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise SchemaError("n must be >= 1")
        if self.beta not in (0.0, 0.03):
            raise SchemaError("beta must be 0 or 0.03")
        if self.outcome_variant not in VARIANTS:
            raise SchemaError(f"outcome_variant must be one of {VARIANTS}")


def synth_schema() -> FeatureSchema:
    return FeatureSchema((
        Column("G", SENSITIVE, BINARY),
        Column("A", SENSITIVE),
        Column("E", COVARIATE),
        Column("I", COVARIATE),
        Column("S_sav", COVARIATE),
        Column("L", TREATMENT),
        Column("D", TREATMENT),
        Column("Y", OUTCOME, BINARY),
    ))


def _outcome_score_arg(values, delta: float) -> np.ndarray:
    I, S = values["I"], values["S_sav"]
    L, D = values["L"], values["D"]
    alpha = np.where((I > 0) & (S > 0), 1.0, -1.0)
    return delta * (-L - D) + 0.3 * (I + S + alpha * I * S)


def build_oracle(config: SynthConfig) -> Scm:
    """Ground-truth model for the synthetic loan process.

    Gaussian noise scales follow the generating process as calibrated against
    its published summary statistics: the noise standard deviations are
    0.25 (E), 4 (I), 5 (S_sav), 10 (L), 9 (D) and 5 (Y, noisy variant), i.e.
    NoiseSpec variances are their squares.
    """
    beta, gamma, delta = config.beta, config.gamma, config.delta

    mechanisms = {
        "G": RootMechanism("G"),
        "A": ContinuousMechanism(
            "A", (),
            forward=lambda v, u: -35.0 + u,
            inverse=lambda v, obs: obs + 35.0,
        ),
        "E": ContinuousMechanism(
            "E", ("G", "A"),
            forward=lambda v, u: -0.5 + expit(-1.0 + 0.5 * v["G"] + expit(0.1 * v["A"]) + u),
            inverse=lambda v, obs: logit(obs + 0.5) - (-1.0 + 0.5 * v["G"] + expit(0.1 * v["A"])),
        ),
        "I": ContinuousMechanism(
            "I", ("G", "A", "E"),
            forward=lambda v, u: -4.0 + 0.1 * (v["A"] + 35.0) + 2.0 * v["G"] + v["G"] * v["E"] + u,
            inverse=lambda v, obs: obs - (-4.0 + 0.1 * (v["A"] + 35.0) + 2.0 * v["G"] + v["G"] * v["E"]),
        ),
        "S_sav": ContinuousMechanism(
            "S_sav", ("I",),
            forward=lambda v, u: -4.0 + 1.5 * (v["I"] > 0) * v["I"] + u,
            inverse=lambda v, obs: obs - (-4.0 + 1.5 * (v["I"] > 0) * v["I"]),
        ),
        "L": ContinuousMechanism(
            "L", ("G", "A", "S_sav"),
            forward=lambda v, u: 1.0 + 0.01 * (v["A"] - 5.0) * (5.0 - v["A"])
            + 2.0 * (1.0 - v["G"]) + beta * v["S_sav"] + u,
            inverse=lambda v, obs: obs - (1.0 + 0.01 * (v["A"] - 5.0) * (5.0 - v["A"])
                                          + 2.0 * (1.0 - v["G"]) + beta * v["S_sav"]),
        ),
        "D": ContinuousMechanism(
            "D", ("G", "A", "L"),
            forward=lambda v, u: -1.0 + 0.1 * v["A"] + 3.0 * (1.0 - v["G"]) + v["L"] + u,
            inverse=lambda v, obs: obs - (-1.0 + 0.1 * v["A"] + 3.0 * (1.0 - v["G"]) + v["L"]),
        ),
    }

    y_parents = ("G", "I", "S_sav", "L", "D")
    if config.outcome_variant == "noisy":
        mechanisms["Y"] = ThresholdMechanism(
            "Y", y_parents,
            score=lambda v: _outcome_score_arg(v, delta),
            coef=lambda v: gamma * (1.0 - v["G"]),
        )
        y_noise = NoiseSpec.gaussian(0.0, 25.0)
    else:
        mechanisms["Y"] = ThresholdMechanism(
            "Y", y_parents,
            score=lambda v: expit(_outcome_score_arg(v, delta)) - (0.5 + gamma * (1.0 - v["G"])),
            coef=None,
        )
        y_noise = NoiseSpec.point_mass(0.0)

    noise = {
        "G": NoiseSpec.bernoulli(0.5),
        "A": NoiseSpec.gamma(10.0, 3.5),
        "E": NoiseSpec.gaussian(0.0, 0.0625),
        "I": NoiseSpec.gaussian(0.0, 16.0),
        "S_sav": NoiseSpec.gaussian(0.0, 25.0),
        "L": NoiseSpec.gaussian(0.0, 100.0),
        "D": NoiseSpec.gaussian(0.0, 81.0),
        "Y": y_noise,
    }
    return Scm(synth_schema(), mechanisms, noise)


def generate(config: SynthConfig) -> Dataset:
    """Sample ``config.n`` rows from the oracle model at ``config.seed``."""
    data = sample(build_oracle(config), config.n, config.seed)
    data.provenance.update({"generator": "synth.generate", "synth": asdict(config)})
    return data
