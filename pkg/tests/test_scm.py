"""Core engine tests: noise specs, mechanisms, abduction, counterfactual ops."""
import numpy as np
import pytest
from scipy import stats

from treatfair.errors import (
    Inconsistent,
    MissingColumn,
    NonInvertible,
    PlanOrderViolation,
    SchemaError,
    SchemaMismatch,
)
from treatfair.schema import BINARY, Dataset, schema_from_roles
from treatfair.scm import (
    ContinuousMechanism,
    InterventionPlan,
    LearnedAdditive,
    LearnedThreshold,
    NoiseSpec,
    RootMechanism,
    Scm,
    ThresholdMechanism,
    abduct,
    counterfactual,
    direct_sensitive_label_effect,
    downstream_outcome,
    path_specific_counterfactual,
    predict,
    sample,
)


def toy_model() -> Scm:
    """S -> X -> Z -> Y chain with direct S -> Z and Z -> Y edges."""
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
            "Y", ("Z",), score=lambda v: v["Z"] - 1.0, coef=lambda v: 1.0
        ),
    }
    noise = {
        "S": NoiseSpec.bernoulli(0.5),
        "X": NoiseSpec.gaussian(0.0, 1.0),
        "Z": NoiseSpec.gaussian(0.0, 4.0),
        "Y": NoiseSpec.gaussian(0.0, 1.0),
    }
    return Scm(schema, mechanisms, noise)


# ---------------------------------------------------------------------------
# noise specs
# ---------------------------------------------------------------------------

def test_gaussian_second_parameter_is_variance():
    spec = NoiseSpec.gaussian(0.0, 0.25)
    rng = np.random.default_rng(3)
    draws = spec.sample(rng, 200_000)
    assert abs(draws.std() - 0.5) < 5e-3  # sd = sqrt(variance)


def test_noise_cdf_ppf_round_trip():
    qs = np.array([0.01, 0.2, 0.5, 0.8, 0.99])
    for spec in (
        NoiseSpec.gaussian(1.0, 9.0),
        NoiseSpec.gamma(10.0, 3.5),
        NoiseSpec.logistic(0.0, 1.0),
    ):
        np.testing.assert_allclose(spec.cdf(spec.ppf(qs)), qs, atol=1e-12)


def test_noise_validation():
    with pytest.raises(SchemaError):
        NoiseSpec.bernoulli(1.5)
    with pytest.raises(SchemaError):
        NoiseSpec.gaussian(0.0, -1.0)
    with pytest.raises(SchemaError):
        NoiseSpec.gamma(0.0, 1.0)
    with pytest.raises(SchemaError):
        NoiseSpec("triangular", (0.0, 1.0))


def test_zero_variance_gaussian_is_deterministic():
    assert NoiseSpec.gaussian(2.0, 0.0).deterministic
    assert NoiseSpec.point_mass(3.0).deterministic
    assert not NoiseSpec.gaussian(0.0, 1.0).deterministic


def test_gamma_logpdf_matches_scipy():
    spec = NoiseSpec.gamma(10.0, 3.5)
    x = np.array([5.0, 20.0, 60.0])
    np.testing.assert_allclose(
        spec.logpdf(x), stats.gamma.logpdf(x, a=10.0, scale=3.5), rtol=1e-12
    )


# ---------------------------------------------------------------------------
# mechanisms
# ---------------------------------------------------------------------------

def test_abduction_round_trip_explicit_inverse():
    model = toy_model()
    data = sample(model, 500, seed=7)
    u = abduct(model, data)
    re = predict(model, u)
    for name in model.schema.names():
        np.testing.assert_allclose(re[name], data.column(name), atol=1e-9)


def test_bisection_abduction_matches_inverse():
    fwd = lambda v, u: 2.0 * v["S"] + u**3  # monotone, nonlinear in u
    with_inv = ContinuousMechanism(
        "X", ("S",), forward=fwd, inverse=lambda v, obs: np.cbrt(obs - 2.0 * v["S"])
    )
    without = ContinuousMechanism("X", ("S",), forward=fwd, inverse=None)
    values = {"S": np.array([0.0, 1.0, 1.0])}
    obs = np.array([0.3, 2.0, -4.0])
    spec = NoiseSpec.gaussian(0.0, 1.0)
    u_search = without.abduct(values, obs, spec)
    u_exact = with_inv.abduct(values, obs, spec)
    # the search may stop anywhere that reproduces the observation
    np.testing.assert_allclose(fwd(values, u_search), obs, atol=1e-8)
    np.testing.assert_allclose(u_search, u_exact, atol=1e-4)


def test_non_invertible_mechanism_raises():
    flat = ContinuousMechanism("X", (), forward=lambda v, u: np.zeros_like(u), inverse=None)
    with pytest.raises(NonInvertible):
        flat.abduct({}, np.array([1.0]), NoiseSpec.gaussian(0.0, 1.0))


def test_threshold_abduction_reproduces_label():
    mech = ThresholdMechanism("Y", ("Z",), score=lambda v: v["Z"], coef=lambda v: 2.0)
    spec = NoiseSpec.gaussian(0.0, 25.0)
    values = {"Z": np.linspace(-30.0, 30.0, 41)}
    for label in (0.0, 1.0):
        observed = np.full(41, label)
        u = mech.abduct(values, observed, spec)
        np.testing.assert_array_equal(mech.evaluate(values, u), observed)


def test_threshold_abduction_negative_coef():
    mech = ThresholdMechanism("Y", ("Z",), score=lambda v: v["Z"], coef=lambda v: -1.5)
    spec = NoiseSpec.gaussian(0.0, 4.0)
    values = {"Z": np.array([-2.0, 0.0, 3.0])}
    for label in (0.0, 1.0):
        observed = np.full(3, label)
        u = mech.abduct(values, observed, spec)
        np.testing.assert_array_equal(mech.evaluate(values, u), observed)


def test_threshold_inconsistent_deterministic():
    mech = ThresholdMechanism("Y", ("Z",), score=lambda v: v["Z"], coef=None)
    spec = NoiseSpec.point_mass(0.0)
    values = {"Z": np.array([5.0])}
    with pytest.raises(Inconsistent):
        mech.abduct(values, np.array([0.0]), spec)  # score 5 always yields 1


def test_threshold_prob_one_and_zero_are_complements():
    mech = ThresholdMechanism("Y", ("Z",), score=lambda v: v["Z"], coef=lambda v: 0.5)
    spec = NoiseSpec.gaussian(0.0, 1.0)
    values = {"Z": np.array([-15.0, -1.0, 0.0, 1.0, 15.0])}
    p1 = mech.prob_one(values, spec)
    p0 = mech.prob_zero(values, spec)
    np.testing.assert_allclose(p1 + p0, 1.0, atol=1e-12)
    # direct computation keeps tiny probabilities that 1 - p1 would round away
    assert 0.0 < p0[-1] < 1e-100


def test_learned_additive_doc_round_trip():
    mech = LearnedAdditive(
        node="Z", parents=("S", "X"),
        terms=(("lin", "S"), ("lin", "X"), ("prod", "S", "X")),
        coefs=np.array([1.0, -0.5, 0.25]), intercept=2.0, residual_scale=1.3,
    )
    back = LearnedAdditive.from_doc(mech.to_doc())
    values = {"S": np.array([0.0, 1.0]), "X": np.array([2.0, -1.0])}
    u = np.array([0.1, -0.2])
    np.testing.assert_array_equal(back.evaluate(values, u), mech.evaluate(values, u))


def test_learned_threshold_doc_round_trip():
    mech = LearnedThreshold(
        node="Y", parents=("Z",), terms=(("lin", "Z"),),
        coefs=np.array([0.8]), intercept=-0.1,
    )
    back = LearnedThreshold.from_doc(mech.to_doc())
    values = {"Z": np.array([-3.0, 0.5, 4.0])}
    u = np.zeros(3)
    np.testing.assert_array_equal(back.evaluate(values, u), mech.evaluate(values, u))


# ---------------------------------------------------------------------------
# model-level operations
# ---------------------------------------------------------------------------

def test_sample_is_deterministic_given_seed():
    model = toy_model()
    a = sample(model, 100, seed=5)
    b = sample(model, 100, seed=5)
    for name in model.schema.names():
        np.testing.assert_array_equal(a.column(name), b.column(name))


def test_counterfactual_three_step_by_hand():
    model = toy_model()
    row = {"S": 1.0, "X": 3.5, "Z": -1.0, "Y": 0.0}
    cf = counterfactual(model, row, {"S": 0.0})
    # u_X = 3.5 - 1 - 2 = 0.5, so X' = 1 + 0.5 = 1.5
    assert cf["X"] == pytest.approx(1.5, abs=1e-12)
    # u_Z = -1 - 0.5*3.5 + 3 = 0.25, so Z' = 0.5*1.5 + 0.25 = 1.0
    assert cf["Z"] == pytest.approx(1.0, abs=1e-12)


def test_counterfactual_null_do_is_identity():
    model = toy_model()
    data = sample(model, 200, seed=11)
    same = counterfactual(model, data, {})
    for name in model.schema.names():
        np.testing.assert_allclose(same.column(name), data.column(name), atol=1e-9)


def test_counterfactual_unknown_target():
    model = toy_model()
    with pytest.raises(MissingColumn):
        counterfactual(model, sample(model, 5, seed=0), {"W": 1.0})


def test_single_stage_plan_equals_plain_counterfactual():
    model = toy_model()
    data = sample(model, 150, seed=3)
    plan = InterventionPlan(({"S": 0.0},))
    via_plan = path_specific_counterfactual(model, data, plan)
    plain = counterfactual(model, data, {"S": 0.0})
    for name in model.schema.names():
        np.testing.assert_allclose(via_plan.column(name), plain.column(name), atol=1e-9)


def test_path_specific_blocks_mediation():
    model = toy_model()
    row = {"S": 1.0, "X": 3.5, "Z": -1.0, "Y": 0.0}
    plan = InterventionPlan(({"S": 0.0}, {"X": row["X"]}))
    out = path_specific_counterfactual(model, row, plan)
    # X pinned to its factual value, so only the direct S -> Z edge moves:
    # Z' = Z + 3*(1 - 0) = -1 + 3 = 2
    assert out["X"] == pytest.approx(3.5, abs=1e-12)
    assert out["Z"] == pytest.approx(2.0, abs=1e-12)


def test_plan_order_violation():
    model = toy_model()
    row = {"S": 1.0, "X": 3.5, "Z": -1.0, "Y": 0.0}
    plan = InterventionPlan(({"Z": 0.0}, {"S": 0.0}))  # S is an ancestor of Z
    with pytest.raises(PlanOrderViolation):
        path_specific_counterfactual(model, row, plan)


def test_empty_stage_rejected():
    with pytest.raises(SchemaError):
        InterventionPlan(({},))


def test_downstream_outcome_mapping_and_array_agree():
    model = toy_model()
    data = sample(model, 80, seed=9)
    z = data.column("Z") + 1.0
    by_map = downstream_outcome(model, data, {"Z": z})
    by_arr = downstream_outcome(model, data, z)
    np.testing.assert_array_equal(by_map, by_arr)
    assert set(np.unique(by_map)) <= {0.0, 1.0}


def test_downstream_outcome_wrong_block():
    model = toy_model()
    data = sample(model, 10, seed=1)
    with pytest.raises(SchemaMismatch):
        downstream_outcome(model, data, {"X": np.zeros(10)})


def test_direct_label_effect_pins_covariates_and_treatments():
    model = toy_model()
    data = sample(model, 300, seed=21)
    y = direct_sensitive_label_effect(model, data, {"S": 0.0})
    # no direct S -> Y edge in the toy model, so labels are unchanged
    np.testing.assert_array_equal(y, data.column("Y"))


def test_binary_outputs_sanitized():
    model = toy_model()
    out = counterfactual(model, {"S": 1.0, "X": 0.0, "Z": 50.0, "Y": 1.0}, {"Y": 7.0})
    assert out["Y"] == 1.0  # clamped into {0, 1}


def test_scalar_mapping_instance_round_trip():
    model = toy_model()
    row = {"S": 0.0, "X": 1.2, "Z": 0.3, "Y": 1.0}
    u = abduct(model, row)
    assert isinstance(u["X"], float)
    re = predict(model, u)
    assert re["X"] == pytest.approx(row["X"], abs=1e-12)


def test_scm_validates_parent_order():
    schema = schema_from_roles(["S"], [], ["Z"], "Y", kinds={"S": BINARY})
    mechanisms = {
        "S": RootMechanism("S"),
        "Z": ContinuousMechanism(
            "Z", ("Y",), forward=lambda v, u: u, inverse=lambda v, o: o
        ),  # parent appears later in the schema
        "Y": ThresholdMechanism("Y", (), score=lambda v: np.array(0.0), coef=None),
    }
    noise = {
        "S": NoiseSpec.bernoulli(0.5),
        "Z": NoiseSpec.gaussian(0.0, 1.0),
        "Y": NoiseSpec.point_mass(0.0),
    }
    with pytest.raises(SchemaError):
        Scm(schema, mechanisms, noise)


def test_instance_missing_column():
    model = toy_model()
    with pytest.raises(SchemaMismatch):
        abduct(model, {"S": 1.0, "X": 0.0})
