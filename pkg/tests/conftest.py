import dataclasses
from datetime import date

import pytest

from lendscore import ingest
from lendscore.domain import LoanRecord, LoanStatus, derive_ratios
from lendscore.synth import SynthConfig, gen_synthetic


def make_record(**overrides):
    base = dict(
        loan_id="L1",
        issue_date=date(2010, 3, 1),
        funded_amount=12000.0,
        installment=500.0,
        grade="B",
        subgrade="B3",
        purpose="car",
        fico=700,
        annual_income=60000.0,
        housing="rent",
        employment_length="5",
        credit_history_length=10.0,
        delinq_2yrs=0,
        inquiries_6m=1,
        public_records=0,
        revol_util=0.4,
        open_accounts=8,
        months_since_last_delinq=None,
        dti=0.2,
        status=LoanStatus.NON_DEFAULT,
    )
    base.update(overrides)
    rec = LoanRecord(**base)
    if rec.annual_income > 0 and "loan_to_income" not in overrides:
        rec = derive_ratios(rec)
    return rec


@pytest.fixture
def record():
    return make_record()


@pytest.fixture(scope="session")
def small_cohort():
    """A 1500-loan synthetic cohort, cheap enough for unit tests."""
    return gen_synthetic(SynthConfig(n_loans=1500, seed=7))


@pytest.fixture(scope="session")
def small_split(small_cohort):
    return ingest.split_train_test(small_cohort, 0.8, 7)


def replace(rec, **kw):
    return dataclasses.replace(rec, **kw)
