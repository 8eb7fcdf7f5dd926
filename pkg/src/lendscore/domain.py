"""Loan records and the invariants every other module relies on."""

from __future__ import annotations

import dataclasses
import enum
import math
import re
from dataclasses import dataclass
from datetime import date
from typing import Optional

from .errors import ZeroIncome

GRADES = tuple("ABCDEFG")
SUBGRADES = tuple(f"{g}{n}" for g in GRADES for n in range(1, 6))
PURPOSES = (
    "car",
    "credit_card",
    "debt_consolidation",
    "educational",
    "home_improvement",
    "house",
    "major_purchase",
    "medical",
    "moving",
    "other",
    "renewable_energy",
    "small_business",
    "vacation",
    "wedding",
)
HOUSING = ("own", "rent", "mortgage", "other")
EMPLOYMENT_LENGTHS = ("<1", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10+", "n/a")
FICO_MIN, FICO_MAX = 300, 850

_SUBGRADE_RE = re.compile(r"^[A-G][1-5]$")
_RATIO_RTOL = 1e-9


class LoanStatus(enum.Enum):
    DEFAULT = "Default"
    NON_DEFAULT = "NonDefault"

    @classmethod
    def parse(cls, text):
        """Map the status spellings seen in exports onto the two states.

        Returns None for blank text (an unscored listing).
        """
        key = text.strip().lower().replace("_", " ").replace("-", " ")
        if not key:
            return None
        if key in ("default", "charged off", "1"):
            return cls.DEFAULT
        if key in ("nondefault", "non default", "fully paid", "paid", "0"):
            return cls.NON_DEFAULT
        raise ValueError(f"unrecognised loan status {text!r}")


@dataclass(frozen=True)
class CashFlowEvent:
    date: date
    amount: float


@dataclass(frozen=True)
class LoanRecord:
    loan_id: str
    issue_date: date
    funded_amount: float
    installment: float
    grade: str
    subgrade: str
    purpose: str
    fico: int
    annual_income: float
    housing: str
    employment_length: str
    credit_history_length: float
    delinq_2yrs: int
    inquiries_6m: int
    public_records: int
    revol_util: float
    open_accounts: int
    # None is the "never delinquent" marker
    months_since_last_delinq: Optional[int]
    dti: float
    loan_to_income: Optional[float] = None
    installment_to_income: Optional[float] = None
    status: Optional[LoanStatus] = None
    cash_flows: Optional[tuple] = None
    irr: Optional[float] = None

    @property
    def is_default(self):
        return self.status is LoanStatus.DEFAULT


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    test: tuple
    seed: int


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str

    def __str__(self):
        return f"{self.field}: {self.rule}"


def derive_ratios(record):
    """Fill loan-to-income and annual installment-to-income from the raw fields."""
    if not record.annual_income > 0:
        raise ZeroIncome(f"loan {record.loan_id}: annual_income is {record.annual_income}")
    return dataclasses.replace(
        record,
        loan_to_income=record.funded_amount / record.annual_income,
        installment_to_income=12.0 * record.installment / record.annual_income,
    )


def _finite(x):
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate_record(record):
    """Return a list of Violation for every broken invariant (empty when valid)."""
    out = []

    def bad(field, rule):
        out.append(Violation(field, rule))

    if not record.loan_id:
        bad("loan_id", "empty identifier")
    if not _finite(record.funded_amount) or record.funded_amount <= 0:
        bad("funded_amount", "must be a finite amount > 0")
    if not _finite(record.installment) or record.installment <= 0:
        bad("installment", "must be a finite amount > 0")
    if record.grade not in GRADES:
        bad("grade", f"unknown grade {record.grade!r}")
    if not _SUBGRADE_RE.match(record.subgrade or ""):
        bad("subgrade", f"unknown subgrade {record.subgrade!r}")
    elif record.grade in GRADES and record.subgrade[0] != record.grade:
        bad("grade", f"grade/subgrade mismatch ({record.grade} vs {record.subgrade})")
    if record.purpose not in PURPOSES:
        bad("purpose", f"unknown purpose {record.purpose!r}")
    if not isinstance(record.fico, int) or not FICO_MIN <= record.fico <= FICO_MAX:
        bad("fico", f"score {record.fico!r} outside {FICO_MIN}-{FICO_MAX}")
    if record.housing not in HOUSING:
        bad("housing", f"unknown housing {record.housing!r}")
    if not record.employment_length:
        bad("employment_length", "empty category")

    for name in ("annual_income", "credit_history_length", "revol_util", "dti"):
        value = getattr(record, name)
        if not _finite(value):
            bad(name, "not a finite number")
        elif value < 0:
            bad(name, "negative")
    for name in ("delinq_2yrs", "inquiries_6m", "public_records", "open_accounts"):
        value = getattr(record, name)
        if not isinstance(value, int) or value < 0:
            bad(name, "must be a count >= 0")
    msld = record.months_since_last_delinq
    if msld is not None and (not isinstance(msld, int) or msld < 0):
        bad("months_since_last_delinq", "must be a count >= 0 or the never marker")

    income_ok = _finite(record.annual_income) and record.annual_income > 0
    for name, expected in (
        ("loan_to_income", record.funded_amount / record.annual_income if income_ok else None),
        ("installment_to_income", 12.0 * record.installment / record.annual_income if income_ok else None),
    ):
        value = getattr(record, name)
        if value is None:
            bad(name, "missing (annual_income must be > 0 to derive it)")
        elif not _finite(value) or value < 0:
            bad(name, "must be a finite ratio >= 0")
        elif expected is not None and _finite(expected) and not math.isclose(
            value, expected, rel_tol=_RATIO_RTOL, abs_tol=1e-12
        ):
            bad(name, f"inconsistent with amounts (expected {expected!r})")

    if record.cash_flows is not None:
        for i, ev in enumerate(record.cash_flows):
            if not _finite(ev.amount):
                bad("cash_flows", f"event {i} amount not finite")
    if record.irr is not None and not _finite(record.irr):
        bad("irr", "not finite")
    return out
