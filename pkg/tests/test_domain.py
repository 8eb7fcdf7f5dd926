import pytest
from hypothesis import given
from hypothesis import strategies as st

from lendscore.domain import LoanStatus, derive_ratios, validate_record
from lendscore.errors import ZeroIncome

from conftest import make_record, replace


def test_derive_ratios_examples(record):
    assert record.loan_to_income == pytest.approx(0.2)
    assert record.installment_to_income == pytest.approx(0.1)


def test_derive_ratios_zero_income():
    rec = make_record(annual_income=0.0)
    with pytest.raises(ZeroIncome):
        derive_ratios(rec)


@given(
    funded=st.floats(1, 1e6),
    income=st.floats(1, 1e7),
    installment=st.floats(1, 1e5),
)
def test_derive_ratios_idempotent(funded, income, installment):
    rec = make_record(funded_amount=funded, annual_income=income, installment=installment)
    assert derive_ratios(derive_ratios(rec)) == derive_ratios(rec)


def test_well_formed_record_is_valid(record):
    assert validate_record(record) == []


def test_grade_subgrade_mismatch(record):
    v = validate_record(replace(record, subgrade="C3"))
    assert [x.field for x in v] == ["grade"]
    assert "mismatch" in v[0].rule


def test_negative_revol_util(record):
    v = validate_record(replace(record, revol_util=-0.1))
    assert [(x.field, x.rule) for x in v] == [("revol_util", "negative")]


def test_missing_ratio_reported():
    rec = make_record(annual_income=0.0)
    fields = {v.field for v in validate_record(rec)}
    assert {"loan_to_income", "installment_to_income"} <= fields


def test_inconsistent_ratio(record):
    v = validate_record(replace(record, loan_to_income=0.3))
    assert [x.field for x in v] == ["loan_to_income"]


def test_validate_is_pure(record):
    bad = replace(record, revol_util=-1.0, fico=200)
    assert validate_record(bad) == validate_record(bad)
    assert bad.revol_util == -1.0


@pytest.mark.parametrize(
    "text,status",
    [
        ("Charged Off", LoanStatus.DEFAULT),
        ("Default", LoanStatus.DEFAULT),
        ("Fully Paid", LoanStatus.NON_DEFAULT),
        ("NonDefault", LoanStatus.NON_DEFAULT),
        ("", None),
    ],
)
def test_status_parse(text, status):
    assert LoanStatus.parse(text) is status


def test_status_parse_rejects_unknown():
    with pytest.raises(ValueError):
        LoanStatus.parse("Current")
