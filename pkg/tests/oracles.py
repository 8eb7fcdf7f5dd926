"""Independent reference implementations used only by the tests."""

from datetime import date, timedelta

import numpy as np

from lendscore.domain import CashFlowEvent
from lendscore.irr import FLOOR_RATE


def npv_by_terms(flows, rate):
    """Plain term-by-term discounting, no vectorisation."""
    t0 = min(e.date for e in flows)
    total = 0.0
    for e in flows:
        total += e.amount / (1.0 + rate) ** ((e.date - t0).days / 365.0)
    return total


GRID = np.linspace(FLOOR_RATE, 10.0, 1_000_001)
GRID_STEP = GRID[1] - GRID[0]


def grid_scan_irr(flows):
    """Rate on a 10^6-point grid where NPV is closest to zero.

    Discount factors are built by multiplying per-gap powers of the daily
    factor, so each flow costs one multiply over the grid.
    """
    t0 = min(e.date for e in flows)
    days = np.array([(e.date - t0).days for e in flows])
    amounts = np.array([e.amount for e in flows])
    order = np.argsort(days, kind="stable")
    log_daily = -np.log1p(GRID) / 365.0
    gap_factor = {}
    disc = np.ones_like(GRID)
    vals = np.zeros_like(GRID)
    prev = 0
    for i in order:
        gap = days[i] - prev
        if gap:
            if gap not in gap_factor:
                gap_factor[gap] = np.exp(gap * log_daily)
            disc = disc * gap_factor[gap]
            prev = days[i]
        vals += amounts[i] * disc
    return GRID[np.argmin(np.abs(vals))]


def monthly_dates(start, n):
    out = []
    y, m = start.year, start.month
    for k in range(1, n + 1):
        mm = m - 1 + k
        out.append(date(y + mm // 12, mm % 12 + 1, min(start.day, 28)))
    return out


def random_loan_schedule(rng):
    """Funding outflow then monthly inflows, sometimes cut short by a default."""
    principal = float(rng.uniform(1000, 35000))
    months = int(rng.choice([12, 36, 60]))
    r = float(rng.uniform(0.05, 0.30)) / 12
    pay = principal * r / (1 - (1 + r) ** -months)
    start = date(2008, 1, 1) + timedelta(days=int(rng.integers(0, 2000)))
    paid = months if rng.random() < 0.7 else int(rng.integers(1, months))
    flows = [CashFlowEvent(start, -principal)]
    flows += [CashFlowEvent(d, pay) for d in monthly_dates(start, paid)]
    return flows
