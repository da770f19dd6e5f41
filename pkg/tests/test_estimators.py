"""Mechanism fitting: splits, ridge recovery, diagnostics, serialization."""
import json

import numpy as np
import pytest

from treatfair.errors import SchemaError, SchemaMismatch, Underdetermined
from treatfair.estimators import (
    EstimatorConfig,
    fit,
    goodness,
    model_from_doc,
    model_to_doc,
    split_dataset,
)
from treatfair.schema import BINARY, Dataset, schema_from_roles
from treatfair.scm import (
    ContinuousMechanism,
    LearnedAdditive,
    LearnedThreshold,
    NoiseSpec,
    RootMechanism,
    Scm,
    ThresholdMechanism,
    sample,
)


def linear_truth() -> Scm:
    """S -> X -> Z -> Y with known linear coefficients and logistic label noise."""
    schema = schema_from_roles(["S"], ["X"], ["Z"], "Y", kinds={"S": BINARY})
    mechanisms = {
        "S": RootMechanism("S"),
        "X": ContinuousMechanism(
            "X", ("S",),
            forward=lambda v, u: 1.0 + 2.0 * v["S"] + u,
            inverse=lambda v, obs: obs - 1.0 - 2.0 * v["S"],
        ),
        "Z": ContinuousMechanism(
            "Z", ("S", "X"),
            forward=lambda v, u: 0.5 * v["X"] - 3.0 * v["S"] + u,
            inverse=lambda v, obs: obs - 0.5 * v["X"] + 3.0 * v["S"],
        ),
        "Y": ThresholdMechanism(
            "Y", ("X", "Z"), score=lambda v: 0.8 * v["Z"] - 0.4 * v["X"] + 0.5,
            coef=lambda v: 1.0,
        ),
    }
    noise = {
        "S": NoiseSpec.bernoulli(0.5),
        "X": NoiseSpec.gaussian(0.0, 1.0),
        "Z": NoiseSpec.gaussian(0.0, 0.25),
        "Y": NoiseSpec.logistic(0.0, 1.0),
    }
    return Scm(schema, mechanisms, noise)


# ---------------------------------------------------------------------------
# config + splits
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(SchemaError):
        EstimatorConfig(learner="deep_net")
    with pytest.raises(SchemaError):
        EstimatorConfig(basis="fourier")
    with pytest.raises(SchemaError):
        EstimatorConfig(regularization=-1.0)
    with pytest.raises(SchemaError):
        EstimatorConfig(train_split=(0.5, 0.4))  # does not sum to 1
    with pytest.raises(SchemaError):
        EstimatorConfig(learner="oracle")  # oracle needs a model


def test_split_is_contiguous_and_exhaustive(small):
    data, _ = small
    train, val, test = split_dataset(data, (0.8, 0.1, 0.1))
    assert (train.n, val.n, test.n) == (480, 60, 60)
    recombined = np.concatenate([train.column("L"), val.column("L"), test.column("L")])
    np.testing.assert_array_equal(recombined, data.column("L"))


def test_single_fraction_keeps_everything(small):
    data, _ = small
    (everything,) = split_dataset(data, (1.0,))
    assert everything.n == data.n


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def test_fit_assigns_expected_forms(fitted_model):
    model = fitted_model
    assert isinstance(model.mechanisms["G"], RootMechanism)
    assert model.noise["G"].family == "bernoulli"
    # every non-first column is regressed on all earlier columns
    for name in ("A", "E", "I", "S_sav", "L", "D"):
        assert isinstance(model.mechanisms[name], LearnedAdditive)
        assert model.noise[name].family == "gaussian"
    assert isinstance(model.mechanisms["Y"], LearnedThreshold)
    assert model.noise["Y"].family == "logistic"
    # pairwise basis carries sensitive-by-covariate products where both exist
    assert ("prod", "G", "E") in model.mechanisms["I"].terms


def test_unpenalized_fit_recovers_linear_coefficients():
    truth = linear_truth()
    data = sample(truth, 4000, seed=11)
    model = fit(
        data, data.schema,
        EstimatorConfig(regularization=0.0, train_split=(1.0,)),
    )

    z_mech = model.mechanisms["Z"]
    got = dict(zip(z_mech.terms, z_mech.coefs))
    assert got[("lin", "S")] == pytest.approx(-3.0, abs=0.1)
    assert got[("lin", "X")] == pytest.approx(0.5, abs=0.1)
    assert got[("prod", "S", "X")] == pytest.approx(0.0, abs=0.1)  # absent in truth
    assert z_mech.intercept == pytest.approx(0.0, abs=0.1)
    assert model.noise["Z"].params[1] == pytest.approx(0.25, rel=0.2)

    y_mech = model.mechanisms["Y"]
    got_y = dict(zip(y_mech.terms, y_mech.coefs))
    assert got_y[("lin", "Z")] == pytest.approx(0.8, abs=0.25)
    assert got_y[("lin", "X")] == pytest.approx(-0.4, abs=0.25)


def test_default_ridge_fits_the_conditional_mean():
    """Penalized coefficients are shrunk, but the fitted location should still
    track the true conditional mean closely on the training support."""
    truth = linear_truth()
    data = sample(truth, 4000, seed=11)
    model = fit(data, data.schema, EstimatorConfig(train_split=(1.0,)))
    values = {name: data.column(name) for name in ("S", "X")}
    fitted_loc = model.mechanisms["Z"]._loc(values)
    true_loc = 0.5 * data.column("X") - 3.0 * data.column("S")
    rmse = float(np.sqrt(np.mean((fitted_loc - true_loc) ** 2)))
    assert rmse < 0.35  # visible shrinkage bias, but well under the 0.5 noise sd


def test_linear_basis_has_no_products():
    truth = linear_truth()
    data = sample(truth, 2000, seed=4)
    model = fit(data, data.schema, EstimatorConfig(basis="linear", train_split=(1.0,)))
    assert all(kind == "lin" for kind, *_ in model.mechanisms["Z"].terms)


def test_collinear_design_without_penalty_is_underdetermined():
    truth = linear_truth()
    data = sample(truth, 500, seed=2)
    cols = dict(data.cols)
    cols["X"] = np.ones(data.n)  # constant covariate duplicates the intercept
    broken = Dataset(data.schema, cols)
    with pytest.raises(Underdetermined):
        fit(broken, broken.schema, EstimatorConfig(regularization=0.0, train_split=(1.0,)))


def test_too_few_rows_is_underdetermined():
    truth = linear_truth()
    data = sample(truth, 40, seed=7)
    with pytest.raises(Underdetermined):
        fit(data, data.schema, EstimatorConfig(train_split=(1.0,)))


def test_single_class_outcome_is_underdetermined():
    truth = linear_truth()
    data = sample(truth, 500, seed=3)
    cols = dict(data.cols)
    cols["Y"] = np.zeros(data.n)
    degenerate = Dataset(data.schema, cols)
    with pytest.raises(Underdetermined):
        fit(degenerate, degenerate.schema, EstimatorConfig(train_split=(1.0,)))


def test_schema_mismatch_rejected(small):
    data, _ = small
    other = schema_from_roles(["S"], ["X"], ["Z"], "Y", kinds={"S": BINARY})
    with pytest.raises(SchemaMismatch):
        fit(data, other, EstimatorConfig())


def test_oracle_learner_passes_model_through(small):
    data, oracle = small
    model = fit(data, data.schema, EstimatorConfig(learner="oracle", oracle_model=oracle))
    assert model is oracle


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def test_goodness_reports_every_column(balanced, fitted_model):
    data, _ = balanced
    holdout = split_dataset(data, (0.8, 0.1, 0.1))[2]
    report = goodness(fitted_model, holdout)
    assert set(report["per_node"]) == set(data.schema.names())
    assert report["total_loglik"] == pytest.approx(
        sum(entry["loglik"] for entry in report["per_node"].values())
    )
    # additive-noise residuals on held-out rows should stay roughly centered
    assert abs(report["per_node"]["L"]["residual_mean"]) < 0.5


def test_goodness_prefers_the_truth():
    truth = linear_truth()
    data = sample(truth, 4000, seed=19)
    train, holdout = split_dataset(data, (0.75, 0.25))
    model = fit(train, train.schema, EstimatorConfig(train_split=(1.0,)))

    shuffled = sample(truth, 1000, seed=20)
    cols = dict(shuffled.cols)
    rng = np.random.default_rng(0)
    cols["Z"] = rng.permutation(cols["Z"])  # break the X,S -> Z link
    bad_fit = fit(
        Dataset(shuffled.schema, cols), shuffled.schema,
        EstimatorConfig(train_split=(1.0,)),
    )
    good = goodness(model, holdout)["per_node"]["Z"]["loglik"]
    bad = goodness(bad_fit, holdout)["per_node"]["Z"]["loglik"]
    assert good > bad


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_doc_round_trip_is_behaviorally_identical(fitted_model):
    doc = model_to_doc(fitted_model)
    json.dumps(doc)  # must already be JSON-ready
    clone = model_from_doc(doc)
    a = sample(fitted_model, 200, seed=31)
    b = sample(clone, 200, seed=31)
    for name in a.schema.names():
        np.testing.assert_array_equal(a.column(name), b.column(name))


def test_oracle_model_has_no_document_form(balanced):
    _, oracle = balanced
    with pytest.raises(SchemaMismatch):
        model_to_doc(oracle)


def test_from_doc_rejects_foreign_documents():
    with pytest.raises(SchemaMismatch):
        model_from_doc({"kind": "something_else"})
    with pytest.raises(SchemaMismatch):
        model_from_doc(
            {
                "kind": "fitted_scm",
                "schema": [
                    {"name": "S", "role": "sensitive", "kind": "binary", "cardinality": 0},
                    {"name": "X", "role": "covariate", "kind": "continuous", "cardinality": 0},
                    {"name": "Z", "role": "treatment", "kind": "continuous", "cardinality": 0},
                    {"name": "Y", "role": "outcome", "kind": "binary", "cardinality": 0},
                ],
                "mechanisms": {"S": {"form": "mystery"}},
                "noise": {},
            }
        )
