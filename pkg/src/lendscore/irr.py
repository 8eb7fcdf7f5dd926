"""Internal rate of return over dated cash flows.

Day count is actual/365 with annual compounding, measured from the
earliest flow date, so a flow exactly 365 days out is discounted by one
full period. Roots are found by bisection.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoSignChange, NonConvergence, RateOutOfDomain

log = logging.getLogger(__name__)

FLOOR_RATE = -0.9999


@dataclass(frozen=True)
class SolverConfig:
    npv_tolerance: float = 1e-9
    # NPV is flat in the rate over short horizons, so also bound the bracket
    rate_tolerance: float = 1e-12
    max_iter: int = 300
    rate_bounds: tuple = (FLOOR_RATE, 10.0)


@dataclass(frozen=True)
class RateSolution:
    rate: float
    iterations: int
    residual_npv: float
    bracket: tuple
    total_loss: bool = False


def year_fractions(flows):
    t0 = min(ev.date for ev in flows)
    return np.array([(ev.date - t0).days / 365.0 for ev in flows])


def npv(flows, rate):
    """Net present value of ``flows`` at an annual ``rate``."""
    if not flows:
        raise ValueError("npv of an empty cash-flow series")
    if rate <= -1:
        raise RateOutOfDomain(f"rate {rate} <= -1")
    t = year_fractions(flows)
    amounts = np.array([ev.amount for ev in flows], dtype=float)
    return float(np.sum(amounts * np.power(1.0 + rate, -t)))


def _npv_fn(flows):
    t = year_fractions(flows)
    amounts = np.array([ev.amount for ev in flows], dtype=float)

    def f(rate):
        return float(np.sum(amounts * np.power(1.0 + rate, -t)))

    return f, amounts


def solve_irr(flows, config=SolverConfig()):
    """Bisect NPV(rate) = 0 inside ``config.rate_bounds``.

    The tolerance is relative to the largest absolute flow (the funded
    amount for loan-shaped series).
    """
    if not flows:
        raise ValueError("solve_irr needs at least one cash flow")
    lo, hi = config.rate_bounds
    f, amounts = _npv_fn(flows)
    scale = float(np.max(np.abs(amounts))) or 1.0
    tol = config.npv_tolerance * scale

    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return RateSolution(lo, 0, 0.0, (lo, hi))
    if f_hi == 0.0:
        return RateSolution(hi, 0, 0.0, (lo, hi))
    if (f_lo > 0) == (f_hi > 0):
        # NPV decreases in rate for an outflow followed by inflows, so both
        # ends negative means the loss is beyond what the floor can express.
        total_loss = f_lo < 0 and f_hi < 0
        raise NoSignChange(
            f"npv has the same sign at {lo} ({f_lo:.6g}) and {hi} ({f_hi:.6g})",
            total_loss=total_loss,
            floor_rate=lo if total_loss else None,
        )

    a, b, fa = lo, hi, f_lo
    mid, fm = lo, f_lo
    for it in range(1, config.max_iter + 1):
        m = 0.5 * (a + b)
        if m in (a, b):
            break  # bracket at float resolution
        mid, fm = m, f(m)
        if fm == 0.0 or (abs(fm) <= tol and b - a <= config.rate_tolerance):
            return RateSolution(mid, it, fm, (lo, hi))
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    if abs(fm) <= tol:
        return RateSolution(mid, it, fm, (lo, hi))
    raise NonConvergence(
        f"bisection stopped after {config.max_iter} iterations in [{a}, {b}] "
        f"with |npv| = {abs(fm):.3g} > {tol:.3g}"
    )


def irr_or_floor(flows, config=SolverConfig()):
    """solve_irr, but total losses resolve to the floor rate."""
    try:
        return solve_irr(flows, config)
    except NoSignChange as exc:
        if not exc.total_loss:
            raise
        f, _ = _npv_fn(flows)
        return RateSolution(exc.floor_rate, 0, f(exc.floor_rate), config.rate_bounds, total_loss=True)


@dataclass
class IrrReport:
    labeled: int = 0
    total_losses: int = 0
    unlabeled: int = 0
    failures: list = dataclasses.field(default_factory=list)


def assign_irr(loans, config=SolverConfig()):
    """Return (loans with ``irr`` filled, IrrReport).

    Loans without cash flows stay unlabeled; per-loan solver failures are
    recorded in the report instead of raised.
    """
    report = IrrReport()
    out = []
    for loan in loans:
        if not loan.cash_flows:
            report.unlabeled += 1
            out.append(loan)
            continue
        try:
            sol = irr_or_floor(loan.cash_flows, config)
        except (NoSignChange, NonConvergence) as exc:
            report.failures.append((loan.loan_id, str(exc)))
            out.append(loan)
            continue
        report.labeled += 1
        report.total_losses += sol.total_loss
        out.append(dataclasses.replace(loan, irr=sol.rate))
    if report.failures:
        log.warning("IRR failed for %d loans", len(report.failures))
    return out, report


def annuity_payment(principal, annual_rate, months):
    """Level monthly payment of a loan at a nominal annual rate."""
    r = annual_rate / 12.0
    if r == 0:
        return principal / months
    return principal * r / (1.0 - math.pow(1.0 + r, -months))
