from __future__ import annotations

import numpy as np
import pytest

from hitrateopt import (
    DegenerateDataError,
    HitInterval,
    ValidationError,
    hit_rate,
    mae,
    mae_masked,
    mape,
    mape_a,
    r2,
    report,
    rmse,
    rmse_masked,
)
from oracles import ref_metrics


def test_hit_interval_validation():
    with pytest.raises(ValidationError):
        HitInterval(0.5, -0.5)
    with pytest.raises(ValidationError):
        HitInterval(float("-inf"), 0.0)
    band = HitInterval.symmetric(0.2)
    assert band.lower == -0.2 and band.upper == 0.2


def test_hit_rate_perfect_and_counts():
    band = HitInterval(-0.2, 0.2)
    y = np.array([1.0, 2.0, 3.0])
    assert hit_rate(y, y, band) == 1.0
    preds = y + np.array([-0.1, -0.5, 0.05])
    assert hit_rate(preds, y, band) == pytest.approx(2.0 / 3.0)


def test_hit_rate_boundary_is_closed():
    band = HitInterval(-0.2, 0.2)
    assert hit_rate([0.2], [0.0], band) == 1.0
    assert hit_rate([-0.2], [0.0], band) == 1.0
    assert hit_rate([np.nextafter(0.2, 1.0)], [0.0], band) == 0.0


def test_mae_rmse_examples():
    assert mae([1.0, -1.0], [0.0, 0.0]) == 1.0
    assert mae([0.3], [0.0]) == pytest.approx(0.3)
    assert rmse([3.0, 4.0], [0.0, 0.0]) == pytest.approx(np.sqrt(12.5))
    assert rmse([1.0], [1.0]) == 0.0


def test_rmse_dominates_mae():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.normal(size=11)
        p = a + rng.normal(size=11)
        assert rmse(p, a) >= mae(p, a) - 1e-15


def test_r2_examples():
    assert r2([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0
    actuals = np.array([1.0, 2.0, 3.0])
    assert r2(np.full(3, actuals.mean()), actuals) == pytest.approx(0.0)
    assert r2([1.0, 2.0, 4.0], [1.0, 2.0, 3.0]) == pytest.approx(0.5)
    with pytest.raises(DegenerateDataError):
        r2([1.0, 2.0], [4.0, 4.0])


def test_mape_and_adjusted():
    assert mape([202.0], [200.0]) == pytest.approx(0.01)
    assert mape_a([0.6], [0.5]) == pytest.approx(0.1)
    assert mape_a([1.0, 2.0], [1.0, 2.0]) == 0.0
    with pytest.raises(ValidationError):
        mape([1.0], [0.0])
    # the adjusted form is defined at zero actuals
    assert mape_a([0.1], [0.0]) == pytest.approx(0.1)


def test_masked_metrics():
    band = HitInterval(-0.2, 0.2)
    preds = np.array([0.1, 0.5, -0.3])
    actuals = np.zeros(3)
    assert mae_masked(preds, actuals, band) == pytest.approx((0.0 + 0.5 + 0.3) / 3.0)
    assert mae_masked([0.1, -0.1], [0.0, 0.0], band) == 0.0
    assert rmse_masked(preds, actuals, band) >= mae_masked(preds, actuals, band)


def test_masked_metrics_never_exceed_plain():
    rng = np.random.default_rng(3)
    band = HitInterval(-0.1, 0.3)
    for _ in range(25):
        a = rng.normal(size=17)
        p = a + rng.normal(scale=0.4, size=17)
        assert mae_masked(p, a, band) <= mae(p, a) + 1e-15
        assert rmse_masked(p, a, band) <= rmse(p, a) + 1e-15


def test_hit_and_miss_fractions_sum_to_one():
    rng = np.random.default_rng(11)
    band = HitInterval(-0.2, 0.2)
    a = rng.normal(size=40)
    p = a + rng.normal(scale=0.25, size=40)
    err = p - a
    missed = np.count_nonzero(~band.contains(err)) / err.size
    assert hit_rate(p, a, band) + missed == pytest.approx(1.0, abs=1e-15)


def test_shift_invariance():
    rng = np.random.default_rng(5)
    band = HitInterval(-0.15, 0.25)
    a = rng.normal(size=30)
    p = a + rng.normal(scale=0.2, size=30)
    assert hit_rate(p + 5.0, a + 5.0, band) == hit_rate(p, a, band)
    assert mae(p + 5.0, a + 5.0) == pytest.approx(mae(p, a))


def test_permutation_invariance():
    rng = np.random.default_rng(13)
    band = HitInterval(-0.2, 0.2)
    a = rng.normal(size=21)
    p = a + rng.normal(scale=0.3, size=21)
    perm = rng.permutation(21)
    rep = report(p, a, band)
    rep_perm = report(p[perm], a[perm], band)
    assert rep.row() == pytest.approx(rep_perm.row())


def test_report_bundles_individual_metrics():
    rng = np.random.default_rng(17)
    band = HitInterval(-0.2, 0.2)
    a = rng.normal(size=25) + 1.5
    p = a + rng.normal(scale=0.3, size=25)
    rep = report(p, a, band)
    assert rep.hr == hit_rate(p, a, band)
    assert rep.mae == mae(p, a)
    assert rep.rmse == rmse(p, a)
    assert rep.r2 == r2(p, a)
    assert rep.mape == mape(p, a)
    assert rep.mape_a == mape_a(p, a)
    assert rep.mae_hr == mae_masked(p, a, band)
    assert rep.rmse_hr == rmse_masked(p, a, band)
    assert rep.n == 25


def test_report_perfect_predictions():
    band = HitInterval(-0.2, 0.2)
    a = np.array([1.0, 2.0, 3.0])
    rep = report(a, a, band)
    assert rep.hr == 1.0 and rep.mae == 0.0 and rep.rmse == 0.0 and rep.r2 == 1.0


def test_report_mape_none_on_zero_actuals():
    band = HitInterval(-0.2, 0.2)
    rep = report([0.1, 1.0], [0.0, 1.0], band)
    assert rep.mape is None
    assert rep.mape_a is not None


def test_validation_errors():
    band = HitInterval(-0.2, 0.2)
    with pytest.raises(ValidationError):
        hit_rate([], [], band)
    with pytest.raises(ValidationError):
        mae([1.0], [1.0, 2.0])


def test_against_reference_formulas():
    rng = np.random.default_rng(100)
    for _ in range(60):
        n = int(rng.integers(1, 50))
        a = rng.normal(scale=2.0, size=n) + rng.normal()
        if np.ptp(a) == 0 or np.any(a == 0):
            continue
        p = a + rng.normal(scale=0.5, size=n)
        lower, upper = sorted(rng.normal(scale=0.4, size=2))
        band = HitInterval(lower, upper)
        ref = ref_metrics(p, a, lower, upper)
        rep = report(p, a, band)
        assert abs(rep.hr - ref["hr"]) <= 1e-12
        assert abs(rep.mae - ref["mae"]) <= 1e-12
        assert abs(rep.rmse - ref["rmse"]) <= 1e-12
        assert abs(rep.r2 - ref["r2"]) <= 1e-12
        assert abs(rep.mape - ref["mape"]) <= 1e-12
        assert abs(rep.mape_a - ref["mape_a"]) <= 1e-12
        assert abs(rep.mae_hr - ref["mae_hr"]) <= 1e-12
        assert abs(rep.rmse_hr - ref["rmse_hr"]) <= 1e-12
