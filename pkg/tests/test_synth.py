from datetime import date

import numpy as np
import pytest

from lendscore import ingest
from lendscore.domain import CashFlowEvent, validate_record
from lendscore.irr import FLOOR_RATE, irr_or_floor
from lendscore.synth import SynthConfig, amortization_schedule, calibrate_intercept, gen_synthetic


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(default_rate_target=1.0)
    with pytest.raises(ValueError):
        SynthConfig(note_rate_range=(0.2, 0.1))


def test_same_seed_same_cohort():
    a = gen_synthetic(SynthConfig(n_loans=200, seed=3))
    b = gen_synthetic(SynthConfig(n_loans=200, seed=3))
    assert a == b


def test_records_valid_and_labeled(small_cohort):
    assert all(validate_record(r) == [] for r in small_cohort)
    assert all(r.status is not None and r.irr is not None for r in small_cohort)
    assert all(r.grade == r.subgrade[0] for r in small_cohort)


def test_default_rate_near_target(small_cohort):
    # 1500 loans: 3 binomial sigmas is about 0.028
    rate = np.mean([r.is_default for r in small_cohort])
    assert abs(rate - 0.15) < 0.03


def test_positive_irr_tracks_non_default(small_cohort):
    pos = np.mean([r.irr > 0 for r in small_cohort])
    nd = np.mean([not r.is_default for r in small_cohort])
    assert abs(pos - nd) <= 0.02


def test_full_schedule_irr_equals_note_rate():
    rate, start = 0.12, date(2010, 1, 15)
    flows = [CashFlowEvent(start, -10000.0)] + amortization_schedule(10000.0, rate, 36, start)
    # effective annual yield of a monthly-compounded note rate
    assert irr_or_floor(flows).rate == pytest.approx((1 + rate / 12) ** 12 - 1, abs=1e-3)


def test_zero_payment_default_hits_floor():
    flows = [CashFlowEvent(date(2010, 1, 15), -10000.0)]
    assert irr_or_floor(flows).rate == FLOOR_RATE


def test_calibrate_intercept_hits_target():
    logits = np.random.default_rng(0).normal(size=5000)
    b = calibrate_intercept(logits, 0.15)
    assert np.mean(1 / (1 + np.exp(-(logits + b)))) == pytest.approx(0.15, abs=1e-9)


def test_cohort_years(small_cohort):
    assert ingest.filter_cohort(small_cohort) == small_cohort
