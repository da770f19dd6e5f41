"""Treatment-disparity audits against frozen oracle values."""
import numpy as np
import pytest

from treatfair.errors import EmptyGroup, SchemaError, UnknownValue
from treatfair.metrics import (
    DisparityConfig,
    aggregate_flip_indicators,
    disparity_report,
    dtd,
    dtd_e,
    ttd,
    ttd_e,
    ttd_e_multi,
    ttd_multi,
)

F_TO_M = DisparityConfig()
M_TO_F = DisparityConfig(group_pair=(1.0, 0.0))


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(SchemaError):
        DisparityConfig(group_pair=(1.0, 1.0))
    with pytest.raises(SchemaError):
        DisparityConfig(delta="ratio")
    with pytest.raises(SchemaError):
        DisparityConfig(statistic="mode")
    with pytest.raises(SchemaError):
        DisparityConfig(aggregator="sum")


def test_non_sensitive_column_rejected(balanced):
    data, model = balanced
    with pytest.raises(SchemaError):
        ttd(data, model, DisparityConfig(sensitive_column="L"))


def test_empty_group_on_either_side(balanced):
    data, model = balanced
    with pytest.raises(EmptyGroup):
        ttd(data, model, DisparityConfig(group_pair=(5.0, 1.0)))  # audited side
    with pytest.raises(EmptyGroup):
        ttd(data, model, DisparityConfig(group_pair=(0.0, 5.0)))  # target side


# ---------------------------------------------------------------------------
# frozen single-pair values (balanced oracle, seed 218)
# ---------------------------------------------------------------------------

def test_total_shift_female_to_male(balanced):
    data, model = balanced
    med = ttd(data, model, F_TO_M)
    assert med["L"] == -1.9277563660316641
    assert med["D"] == -4.927756366031666
    mean = ttd(data, model, DisparityConfig(statistic="mean"))
    assert mean["L"] == -1.9498196417090887
    assert mean["D"] == -4.949819641709088


def test_total_shift_male_to_female(balanced):
    data, model = balanced
    med = ttd(data, model, M_TO_F)
    assert med["L"] == 1.9279891979316326
    assert med["D"] == 4.927989197931632


def test_direct_shift_is_the_constant_penalty(balanced, unbalanced):
    """With covariates pinned, the only moving parts are the group offsets
    (2 on L, 3 more on D), so the direct shift is exactly constant."""
    for data, model in (balanced, unbalanced):
        assert dtd(data, model, F_TO_M) == {"L": -2.0, "D": -5.0}
        assert dtd(data, model, DisparityConfig(statistic="mean")) == {"L": -2.0, "D": -5.0}
        assert dtd(data, model, M_TO_F) == {"L": 2.0, "D": 5.0}


def test_label_flip_rates(balanced):
    data, model = balanced
    assert ttd_e(data, model, F_TO_M) == {"0": 19.87662782727896, "1": 0.0}
    assert dtd_e(data, model, F_TO_M) == {"0": 20.150788211103496, "1": 0.0}
    assert ttd_e(data, model, M_TO_F) == {"0": 0.0, "1": 18.94807821982468}


def test_label_flip_rates_unbalanced(unbalanced):
    data, model = unbalanced
    assert ttd_e(data, model, M_TO_F)["1"] == 23.03886925795053


def test_flip_direction_is_one_sided(balanced):
    """Moving F->M only ever helps (repaid stays repaid); M->F only ever hurts."""
    data, model = balanced
    assert ttd_e(data, model, F_TO_M)["1"] == 0.0
    assert ttd_e(data, model, M_TO_F)["0"] == 0.0


def test_absolute_delta_mirrors_signed(balanced):
    data, model = balanced
    med = ttd(data, model, DisparityConfig(delta="abs_difference"))
    assert med["L"] == 1.9277563660316641
    assert med["D"] == 4.927756366031666


# ---------------------------------------------------------------------------
# multi-valued sensitive attributes
# ---------------------------------------------------------------------------

def test_multi_binary_reduces_to_pairwise(balanced):
    """With a binary value set the aggregate has a single candidate, so avg and
    max both equal the absolute pairwise mean shift."""
    data, model = balanced
    for agg in ("avg", "max"):
        out = ttd_multi(data, model, DisparityConfig(values=(0.0, 1.0), aggregator=agg))
        assert out["L"] == 1.9498196417090887
        assert out["D"] == 4.949819641709088
    e_out = ttd_e_multi(data, model, DisparityConfig(values=(0.0, 1.0), aggregator="avg"))
    assert e_out == ttd_e(data, model, F_TO_M)


def test_multi_corrected_mean_matches_for_binary(balanced):
    # k = 2 makes both normalizations equal 1
    data, model = balanced
    plain = ttd_multi(data, model, DisparityConfig(values=(0.0, 1.0), aggregator="avg"))
    corrected = ttd_multi(
        data, model,
        DisparityConfig(values=(0.0, 1.0), aggregator="avg", corrected_mean=True),
    )
    assert plain == corrected


def test_multi_variance_is_mean_square_for_binary(balanced):
    data, model = balanced
    var = ttd_multi(data, model, DisparityConfig(values=(0.0, 1.0), aggregator="var"))
    # single candidate: per-row aggregate is the squared shift
    assert var["L"] > ttd_multi(
        data, model, DisparityConfig(values=(0.0, 1.0), aggregator="avg")
    )["L"] ** 2 * 0.99


def test_multi_accepts_joint_mappings(balanced):
    data, model = balanced
    scalar = ttd_multi(data, model, DisparityConfig(values=(0.0, 1.0), aggregator="avg"))
    joint = ttd_multi(
        data, model, DisparityConfig(values=(0.0, {"G": 1.0}), aggregator="avg")
    )
    assert scalar == joint


def test_multi_validation(balanced):
    data, model = balanced
    with pytest.raises(SchemaError):
        ttd_multi(data, model, DisparityConfig(values=(1.0,), aggregator="avg"))
    with pytest.raises(SchemaError):
        ttd_multi(data, model, DisparityConfig(values=(0.0, 1.0)))  # no aggregator
    with pytest.raises(UnknownValue):
        ttd_multi(data, model, DisparityConfig(values=(0.0, 7.0), aggregator="avg"))
    with pytest.raises(UnknownValue):
        ttd_multi(data, model, DisparityConfig(values=(0.0, {"G": 9.0}), aggregator="avg"))


def test_aggregate_flip_indicators():
    flips = np.array([0.0, 1.0])
    assert aggregate_flip_indicators(flips, "avg") == 0.5
    assert aggregate_flip_indicators(flips, "var") == 0.25
    assert aggregate_flip_indicators(flips, "max") == 1.0


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------

def test_report_counts_and_consistency(balanced):
    data, model = balanced
    report = disparity_report(data, model, F_TO_M)
    assert report.counts == {"0.0": 2501, "1.0": 2499}
    assert report.config["sensitive_column"] == "G"
    assert report.ttd["median"] == ttd(data, model, F_TO_M)
    assert report.ttd["mean"] == ttd(data, model, DisparityConfig(statistic="mean"))
    assert report.dtd["median"] == dtd(data, model, F_TO_M)
    assert report.ttd_e == ttd_e(data, model, F_TO_M)
    assert report.dtd_e == dtd_e(data, model, F_TO_M)


def test_report_doc_and_csv_shapes(balanced):
    data, model = balanced
    report = disparity_report(data, model, F_TO_M)
    doc = report.to_doc()
    assert set(doc) == {"config", "counts", "ttd", "dtd", "ttd_e", "dtd_e"}

    rows = report.to_csv_rows()
    assert rows[0] == ("metric", "dimension", "statistic", "value")
    # 2 tables x 2 statistics x 2 treatments + 2 effect tables x 2 labels
    assert len(rows) == 1 + 8 + 4
    shift_rows = [r for r in rows if r[0] in ("ttd", "dtd")]
    for _, _, _, value in shift_rows:
        float(value)  # repr round-trips
    effect_rows = [r for r in rows if r[0].endswith("_e")]
    assert ("ttd_e", "y=0", "percent", "19.88") in effect_rows
