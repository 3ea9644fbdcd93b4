"""Census tables (n -> exact count) and growth-rate fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def fmt_real(x) -> str:
    """Format a real with 12 significant digits; empty field for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".12g")


@dataclass
class CensusTable:
    """Exact counts indexed by n.

    ``entries`` maps n to a nonnegative Python int.  ``metadata`` records how
    the counts were produced (system, localization, base point) and is echoed
    into reports.  ``extras`` holds optional per-n diagnostic columns and
    ``truncated`` flags a table cut short by a budget.  ``records`` keeps the
    point-level objects behind the counts when a census produces them.
    """

    entries: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    truncated: bool = False
    records: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        keys = list(self.entries)
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise ValueError("census keys must be strictly increasing")
        for n, c in self.entries.items():
            if int(c) != c or c < 0:
                raise ValueError(f"count for n={n} must be a nonnegative integer, got {c!r}")

    def add(self, n: int, count: int, **extra):
        if self.entries and n <= max(self.entries):
            raise ValueError(f"n={n} does not extend the table")
        self.entries[n] = int(count)
        if extra:
            self.extras[n] = dict(extra)

    def __getitem__(self, n):
        return self.entries[n]

    def __len__(self):
        return len(self.entries)

    def __contains__(self, n):
        return n in self.entries

    def items(self):
        return self.entries.items()

    @property
    def ns(self):
        return list(self.entries)

    def ratio(self, n: int, h: float) -> float:
        """count(n) * exp(-n h), evaluated in log space so big counts do not overflow."""
        c = self.entries[n]
        if c == 0:
            return 0.0
        return math.exp(math.log(c) - n * h)

    def to_csv(self, h: float | None = None, extra_columns=()) -> str:
        cols = ["n", "count", "log_count_over_n", "ratio_to_lambda_n", *extra_columns]
        lines = [",".join(cols)]
        for n, c in self.entries.items():
            logc = math.log(c) / n if c > 0 and n > 0 else None
            ratio = self.ratio(n, h) if h is not None else None
            row = [str(n), str(c), fmt_real(logc), fmt_real(ratio)]
            ex = self.extras.get(n, {})
            for col in extra_columns:
                v = ex.get(col)
                row.append(v if isinstance(v, str) else (str(v) if isinstance(v, int) else fmt_real(v)))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def growth_rate(table: CensusTable, window=None):
    """Least-squares slope of log(count) against n over ``window``.

    ``window`` is an inclusive ``(lo, hi)`` pair (default: whole table).
    Zero counts are skipped and listed in the diagnostics rather than
    treated as -inf.  Returns ``(slope, diagnostics)``.
    """
    lo, hi = window if window is not None else (min(table.ns), max(table.ns))
    ns, logs, skipped = [], [], []
    per_point = {}
    for n, c in table.items():
        if n < lo or n > hi:
            continue
        if c == 0:
            skipped.append(n)
            continue
        ns.append(n)
        logs.append(math.log(c))
        if n > 0:
            per_point[n] = math.log(c) / n
    if len(ns) < 3:
        raise ValueError(f"growth_rate needs at least 3 nonzero counts in window {lo}..{hi}, got {len(ns)}")
    x = np.asarray(ns, dtype=float)
    y = np.asarray(logs)
    xm, ym = x.mean(), y.mean()
    slope = float(((x - xm) * (y - ym)).sum() / ((x - xm) ** 2).sum())
    intercept = float(ym - slope * xm)
    return slope, {
        "window": (lo, hi),
        "intercept": intercept,
        "per_point": per_point,
        "skipped": skipped,
        "used": len(ns),
    }
