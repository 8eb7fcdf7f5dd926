"""CSV loading, payment joins, cohort filtering, splitting and summaries."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import date, datetime

import numpy as np

from .domain import CashFlowEvent, LoanRecord, LoanStatus, DatasetSplit, derive_ratios, validate_record
from .errors import EmptyInput, ParseError, SchemaError

log = logging.getLogger(__name__)

NEVER = "never"

# field -> parser; every field listed here must be mapped to a column
REQUIRED_FIELDS = (
    "loan_id",
    "issue_date",
    "funded_amount",
    "installment",
    "grade",
    "subgrade",
    "purpose",
    "fico",
    "annual_income",
    "housing",
    "employment_length",
    "credit_history_length",
    "delinq_2yrs",
    "inquiries_6m",
    "public_records",
    "revol_util",
    "open_accounts",
    "months_since_last_delinq",
    "dti",
)
# may be absent from the file; the ratios are derived when missing
OPTIONAL_FIELDS = ("status", "loan_to_income", "installment_to_income")

CONTINUOUS_SUMMARY = (
    "funded_amount",
    "installment",
    "annual_income",
    "credit_history_length",
    "delinq_2yrs",
    "inquiries_6m",
    "public_records",
    "revol_util",
    "open_accounts",
    "months_since_last_delinq",
    "loan_to_income",
    "installment_to_income",
    "dti",
    "irr",
)
CATEGORICAL_SUMMARY = ("grade", "subgrade", "purpose", "fico", "housing", "employment_length")


def default_column_map():
    """Identity mapping: every field is read from a column of the same name."""
    return {f: f for f in REQUIRED_FIELDS + OPTIONAL_FIELDS}


def parse_date(text):
    text = text.strip()
    try:
        return date.fromisoformat(text)
    except ValueError:
        # Lending Club exports use "Dec-2011"
        return datetime.strptime(text, "%b-%Y").date()


def _count(text):
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"{text!r} is not a whole count")
    return int(value)


def _months(text):
    text = text.strip()
    if text == "" or text.lower() == NEVER:
        return None
    return _count(text)


def _text(text):
    return text.strip()


def _lower(text):
    return text.strip().lower()


_PARSERS = {
    "loan_id": _text,
    "issue_date": parse_date,
    "funded_amount": float,
    "installment": float,
    "grade": _text,
    "subgrade": _text,
    "purpose": _lower,
    "fico": _count,
    "annual_income": float,
    "housing": _lower,
    "employment_length": _text,
    "credit_history_length": float,
    "delinq_2yrs": _count,
    "inquiries_6m": _count,
    "public_records": _count,
    "revol_util": float,
    "open_accounts": _count,
    "months_since_last_delinq": _months,
    "dti": float,
    "status": LoanStatus.parse,
    "loan_to_income": float,
    "installment_to_income": float,
}


@dataclass(frozen=True)
class Reject:
    row: int
    field: str
    violation: str


def load_loans(path, column_map=None):
    """Read a loans CSV into LoanRecords.

    Returns ``(records, rejects)``. Rows that parse but break a record
    invariant go to ``rejects``; rows that do not parse raise ParseError.
    Row numbers count data rows from 1.
    """
    column_map = column_map or default_column_map()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or ())
        missing = [f for f in REQUIRED_FIELDS if column_map.get(f) not in header]
        if missing:
            cols = ", ".join(f"{f} (column {column_map.get(f)!r})" for f in missing)
            raise SchemaError(f"{path}: missing mapped columns: {cols}")
        present_optional = [f for f in OPTIONAL_FIELDS if column_map.get(f) in header]

        records, rejects = [], []
        for row_no, row in enumerate(reader, start=1):
            values = {}
            for name in REQUIRED_FIELDS + tuple(present_optional):
                raw = row[column_map[name]]
                if raw is None:
                    raise ParseError("short row", row=row_no)
                if name in OPTIONAL_FIELDS and raw.strip() == "":
                    continue
                try:
                    values[name] = _PARSERS[name](raw)
                except ValueError as exc:
                    raise ParseError(f"field {name}: {exc}", row=row_no) from None
            record = LoanRecord(**values)
            if record.annual_income > 0 and (
                record.loan_to_income is None or record.installment_to_income is None
            ):
                record = derive_ratios(record)
            violations = validate_record(record)
            if violations:
                rejects.extend(Reject(row_no, v.field, v.rule) for v in violations)
            else:
                records.append(record)
    if rejects:
        log.info("%s: %d rejected rows", path, len({r.row for r in rejects}))
    return records, rejects


def write_rejects(path, rejects):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "field", "violation"])
        for r in rejects:
            w.writerow([r.row, r.field, r.violation])


def load_payments(path):
    """Read ``loan_id,date,amount`` rows into {loan_id: [CashFlowEvent, ...]}.

    Amounts are lender receipts (positive). Events are sorted by date;
    same-day events keep file order.
    """
    grouped = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return {}
        missing = {"loan_id", "date", "amount"} - set(reader.fieldnames)
        if missing:
            raise SchemaError(f"{path}: missing columns {sorted(missing)}")
        for row_no, row in enumerate(reader, start=1):
            try:
                ev = CashFlowEvent(parse_date(row["date"]), float(row["amount"]))
            except (ValueError, TypeError) as exc:
                raise ParseError(str(exc), row=row_no) from None
            if not math.isfinite(ev.amount):
                raise ParseError("amount not finite", row=row_no)
            grouped[row["loan_id"].strip()].append(ev)
    return {k: sorted(v, key=lambda e: e.date) for k, v in grouped.items()}


@dataclass
class AttachReport:
    with_payments: int = 0
    without_payments: int = 0
    unknown_loan_ids: int = 0
    unknown_payments: int = 0
    defaults_without_payments: int = 0


def attach_cashflows(loans, payments):
    """Prefix each loan's payments with the funding outflow.

    Returns ``(loans, AttachReport)``; payments for loans not in ``loans``
    are counted and ignored. A Default loan with no payment rows is a total
    loss and keeps the lone funding outflow; other loans without payments
    get no cash flows.
    """
    report = AttachReport()
    known = set()
    out = []
    for loan in loans:
        known.add(loan.loan_id)
        events = payments.get(loan.loan_id)
        if not events and loan.is_default:
            report.defaults_without_payments += 1
            flows = (CashFlowEvent(loan.issue_date, -loan.funded_amount),)
            out.append(dataclasses.replace(loan, cash_flows=flows))
            continue
        if not events:
            report.without_payments += 1
            out.append(dataclasses.replace(loan, cash_flows=None))
            continue
        report.with_payments += 1
        flows = (CashFlowEvent(loan.issue_date, -loan.funded_amount),) + tuple(events)
        out.append(dataclasses.replace(loan, cash_flows=flows))
    for loan_id, events in payments.items():
        if loan_id not in known:
            report.unknown_loan_ids += 1
            report.unknown_payments += len(events)
    return out, report


def filter_cohort(loans, min_year=2008, max_year=2013):
    if min_year > max_year:
        raise ValueError(f"min_year {min_year} > max_year {max_year}")
    return [l for l in loans if min_year <= l.issue_date.year <= max_year]


def split_train_test(loans, train_fraction=0.8, seed=0):
    """Seeded uniform partition; both parts keep the input order."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(loans)
    if n == 0:
        raise EmptyInput("cannot split an empty loan set")
    n_train = int(math.floor(train_fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    in_train = np.zeros(n, dtype=bool)
    in_train[perm[:n_train]] = True
    train = tuple(l for l, t in zip(loans, in_train) if t)
    test = tuple(l for l, t in zip(loans, in_train) if not t)
    return DatasetSplit(train=train, test=test, seed=seed)


def _describe(values):
    arr = np.asarray(values, dtype=float)
    q1, q2, q3 = np.percentile(arr, [25, 50, 75])
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
        "min": float(arr.min()),
        "25%": float(q1),
        "50%": float(q2),
        "75%": float(q3),
        "max": float(arr.max()),
    }


def summarize(loans):
    """Descriptive statistics: continuous quantiles, categorical level counts, default rate."""
    if not loans:
        raise EmptyInput("cannot summarize an empty loan set")
    continuous = {}
    for name in CONTINUOUS_SUMMARY:
        vals = [getattr(l, name) for l in loans if getattr(l, name) is not None]
        if vals:
            continuous[name] = _describe(vals)
    never = sum(1 for l in loans if l.months_since_last_delinq is None)
    categorical = {}
    for name in CATEGORICAL_SUMMARY:
        counts = Counter(str(getattr(l, name)) for l in loans)
        categorical[name] = dict(sorted(counts.items()))
    labeled = [l for l in loans if l.status is not None]
    defaults = sum(1 for l in labeled if l.is_default)
    return {
        "n_loans": len(loans),
        "n_labeled": len(labeled),
        "default_rate": defaults / len(labeled) if labeled else None,
        "never_delinquent": never,
        "continuous": continuous,
        "categorical": categorical,
    }


LOAN_COLUMNS = REQUIRED_FIELDS + ("loan_to_income", "installment_to_income", "status")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, LoanStatus):
        return value.value
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


def write_loans(path, loans):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOAN_COLUMNS)
        for l in loans:
            row = []
            for name in LOAN_COLUMNS:
                v = getattr(l, name)
                if name == "months_since_last_delinq" and v is None:
                    row.append(NEVER)
                else:
                    row.append(_fmt(v))
            w.writerow(row)


def write_payments(path, loans):
    """Write every inflow after the funding event as ``loan_id,date,amount``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["loan_id", "date", "amount"])
        for l in loans:
            for ev in (l.cash_flows or ())[1:]:
                w.writerow([l.loan_id, ev.date.isoformat(), repr(float(ev.amount))])
