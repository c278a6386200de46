"""Calendar arithmetic for quarterly and monthly period grids.

Quarters are keyed by ``year * 4 + quarter`` so that lag/lead arithmetic is
plain integer math regardless of how source files date their periods
(quarter-start, quarter-end, or any day inside the quarter).
"""

from __future__ import annotations

import calendar
from datetime import date

DAYS_PER_YEAR = 365.25


def quarter_key(d: date) -> int:
    """Integer key of the quarter containing ``d``."""
    return d.year * 4 + (d.month - 1) // 3


def quarter_end(key: int) -> date:
    """Last calendar day of the quarter with the given key."""
    year, q = divmod(key, 4)
    month = 3 * (q + 1)
    return date(year, month, calendar.monthrange(year, month)[1])


def month_key(d: date) -> int:
    return d.year * 12 + d.month - 1


def last_month_of_quarter(qkey: int) -> int:
    """Month key of the final month in the quarter."""
    year, q = divmod(qkey, 4)
    return year * 12 + 3 * q + 2


def years_between(later: date, earlier: date) -> float:
    """Elapsed time in 365.25-day years (signed)."""
    return (later - earlier).days / DAYS_PER_YEAR
