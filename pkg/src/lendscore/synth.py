"""Seeded synthetic loan cohorts with payment histories.

The generator stands in for the Lending Club files at desk scale. Default
risk is a logistic function of the borrower features plus one planted
grade x purpose interaction; note rates rise with subgrade. Non-defaults
amortize (some prepay in full), defaults stop paying before half term, so
IRR > 0 exactly for the non-default loans.
"""

from __future__ import annotations

import calendar
from dataclasses import dataclass, replace
from datetime import date, timedelta

import numpy as np

from .domain import (
    EMPLOYMENT_LENGTHS,
    SUBGRADES,
    CashFlowEvent,
    LoanRecord,
    LoanStatus,
    derive_ratios,
)
from .irr import annuity_payment, irr_or_floor

PURPOSE_PROBS = {
    "debt_consolidation": 0.45,
    "credit_card": 0.20,
    "home_improvement": 0.07,
    "other": 0.08,
    "major_purchase": 0.04,
    "small_business": 0.04,
    "car": 0.03,
    "medical": 0.02,
    "wedding": 0.02,
    "moving": 0.015,
    "house": 0.015,
    "vacation": 0.01,
    "educational": 0.005,
    "renewable_energy": 0.005,
}
HOUSING_PROBS = {"mortgage": 0.45, "rent": 0.42, "own": 0.12, "other": 0.01}
EMPLOYMENT_PROBS = (0.08, 0.08, 0.09, 0.08, 0.07, 0.07, 0.06, 0.05, 0.05, 0.04, 0.30, 0.03)

# grade x purpose interaction added to the default logit
RISKY_PURPOSES = ("small_business", "medical", "moving", "educational")
SAFE_PURPOSES = ("wedding", "car", "major_purchase", "home_improvement")
INTERACTION_RISKY = 2.5
INTERACTION_SAFE = -1.5


@dataclass(frozen=True)
class SynthConfig:
    n_loans: int = 20000
    default_rate_target: float = 0.15
    seed: int = 1
    note_rate_range: tuple = (0.06, 0.26)
    term_months: tuple = (36, 60)
    prepay_fraction: float = 0.2
    first_year: int = 2008
    last_year: int = 2013
    # multiplies every feature coefficient of the default logit
    signal: float = 3.0

    def __post_init__(self):
        if not 0 < self.default_rate_target < 1:
            raise ValueError("default_rate_target must be in (0, 1)")
        lo, hi = self.note_rate_range
        if not lo < hi:
            raise ValueError("note_rate_range must have low < high")
        if self.n_loans < 1:
            raise ValueError("n_loans must be positive")
        if not self.term_months:
            raise ValueError("term_months must not be empty")


def add_months(d, months):
    y, m = divmod(d.month - 1 + months, 12)
    year, month = d.year + y, m + 1
    return date(year, month, min(d.day, calendar.monthrange(year, month)[1]))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _z(x):
    x = np.asarray(x, dtype=float)
    sd = x.std()
    return (x - x.mean()) / (sd if sd > 0 else 1.0)


def calibrate_intercept(logits, target, tol=1e-12):
    """Find c with mean(sigmoid(logits + c)) == target by bisection."""
    lo, hi = -50.0, 50.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _sigmoid(logits + mid).mean() < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def amortization_schedule(principal, annual_rate, months, start, prepay_month=None):
    """Monthly payments of a level-payment loan, optionally paid off early.

    Returns the list of inflow events (the funding outflow is not included).
    """
    pay = annuity_payment(principal, annual_rate, months)
    r = annual_rate / 12.0
    balance = principal
    events = []
    last = months if prepay_month is None else prepay_month
    for k in range(1, last + 1):
        interest = balance * r
        balance = balance + interest - pay
        amount = pay
        if k == last and prepay_month is not None:
            amount += balance
            balance = 0.0
        events.append(CashFlowEvent(add_months(start, k), amount))
    return events


def _level(rng, n, probs):
    keys = list(probs)
    p = np.array([probs[k] for k in keys])
    return np.array(keys, dtype=object)[rng.choice(len(keys), size=n, p=p / p.sum())]


def gen_synthetic(config=SynthConfig()):
    """Generate ``config.n_loans`` labeled loans with cash flows and IRR."""
    rng = np.random.default_rng(config.seed)
    n = config.n_loans

    sg_weights = np.exp(-(((np.arange(35) - 9.0) / 8.0) ** 2)) + 0.05
    sub_idx = rng.choice(35, size=n, p=sg_weights / sg_weights.sum())
    subgrade = np.array(SUBGRADES, dtype=object)[sub_idx]
    grade_idx = sub_idx // 5

    fico = np.clip(np.round((770 - 2.5 * sub_idx + rng.normal(0, 25, n)) / 5) * 5, 660, 850).astype(int)
    purpose = _level(rng, n, PURPOSE_PROBS)
    housing = _level(rng, n, HOUSING_PROBS)
    emp = np.array(EMPLOYMENT_LENGTHS, dtype=object)[
        rng.choice(len(EMPLOYMENT_LENGTHS), size=n, p=np.array(EMPLOYMENT_PROBS) / sum(EMPLOYMENT_PROBS))
    ]

    income = np.round(np.maximum(np.exp(rng.normal(11.0, 0.5, n)), 4000.0), 2)
    funded = np.round(np.clip(np.exp(rng.normal(np.log(11000), 0.6, n)), 1000, 35000) / 25) * 25
    lo, hi = config.note_rate_range
    note_rate = np.clip(lo + (hi - lo) * sub_idx / 34 + rng.normal(0, 0.003, n), lo, hi)
    terms = np.asarray(config.term_months)[rng.integers(0, len(config.term_months), n)]

    history = rng.gamma(4.0, 4.0, n)
    delinq = rng.poisson(0.25, n)
    inquiries = rng.poisson(0.9, n)
    pubrec = rng.poisson(0.08, n)
    open_acc = 1 + rng.poisson(9, n)
    revol = rng.beta(2.0, 2.2, n) * 1.1
    dti = rng.beta(2.0, 5.0, n) * 0.4
    never = rng.random(n) < 0.55
    msld = np.where(delinq > 0, rng.integers(0, 25, n), rng.integers(0, 121, n))
    never &= delinq == 0

    installment = np.array([annuity_payment(p, r, int(t)) for p, r, t in zip(funded, note_rate, terms)])
    inst_to_inc = 12 * installment / income

    interaction = np.zeros(n)
    risky = np.isin(purpose, RISKY_PURPOSES) & (grade_idx >= 3)
    safe = np.isin(purpose, SAFE_PURPOSES) & (grade_idx <= 1)
    interaction[risky] = INTERACTION_RISKY
    interaction[safe] = INTERACTION_SAFE

    s = config.signal
    logit = s * (
        0.6 * _z(sub_idx)
        + 0.9 * _z(dti)
        + 0.8 * _z(revol)
        + 0.7 * _z(inquiries)
        + 0.9 * _z(inst_to_inc)
        - 0.7 * _z(np.log(income))
        - 0.6 * _z(history)
        + 0.5 * _z(delinq)
        + 0.4 * _z(pubrec)
        + interaction
    ) + rng.normal(0, 0.3, n)
    logit = logit + calibrate_intercept(logit, config.default_rate_target)
    is_default = rng.random(n) < _sigmoid(logit)

    span = (date(config.last_year, 12, 31) - date(config.first_year, 1, 1)).days
    issue_offsets = rng.integers(0, span + 1, n)
    prepay = rng.random(n) < config.prepay_fraction
    u_month = rng.random(n)

    loans = []
    for i in range(n):
        issue = date(config.first_year, 1, 1) + timedelta(days=int(issue_offsets[i]))
        term = int(terms[i])
        if is_default[i]:
            paid = int(u_month[i] * (term // 2))
            events = amortization_schedule(funded[i], note_rate[i], term, issue)[:paid]
        else:
            prepay_month = 1 + int(u_month[i] * (term - 1)) if prepay[i] else None
            events = amortization_schedule(funded[i], note_rate[i], term, issue, prepay_month)
        flows = (CashFlowEvent(issue, -float(funded[i])),) + tuple(
            CashFlowEvent(e.date, float(e.amount)) for e in events
        )
        rec = LoanRecord(
            loan_id=f"L{i + 1:06d}",
            issue_date=issue,
            funded_amount=float(funded[i]),
            installment=float(installment[i]),
            grade=subgrade[i][0],
            subgrade=subgrade[i],
            purpose=str(purpose[i]),
            fico=int(fico[i]),
            annual_income=float(income[i]),
            housing=str(housing[i]),
            employment_length=str(emp[i]),
            credit_history_length=float(round(history[i], 4)),
            delinq_2yrs=int(delinq[i]),
            inquiries_6m=int(inquiries[i]),
            public_records=int(pubrec[i]),
            revol_util=float(round(revol[i], 4)),
            open_accounts=int(open_acc[i]),
            months_since_last_delinq=None if never[i] else int(msld[i]),
            dti=float(round(dti[i], 4)),
            status=LoanStatus.DEFAULT if is_default[i] else LoanStatus.NON_DEFAULT,
            cash_flows=flows,
        )
        rec = derive_ratios(rec)
        loans.append(replace(rec, irr=float(irr_or_floor(flows).rate)))
    return loans
