"""Verdicts comparing censuses with entropy predictions, and atomic report writers."""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

from .census import CensusTable, growth_rate

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Claim:
    id: str
    computed: float | None
    target: float | None
    tolerance: float | None
    verdict: str
    rule: str
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"id": self.id, "computed": _num(self.computed), "target": _num(self.target),
                "tolerance": _num(self.tolerance), "verdict": self.verdict, "rule": self.rule,
                "details": _clean(self.details)}


@dataclass
class VerificationReport:
    claims: list = field(default_factory=list)
    header: dict = field(default_factory=dict)

    def add(self, claim: Claim):
        self.claims.append(claim)

    def extend(self, other: "VerificationReport"):
        self.claims.extend(other.claims)

    def verdicts(self) -> dict:
        return {c.id: c.verdict for c in self.claims}

    @property
    def ok(self) -> bool:
        return all(c.verdict == PASS for c in self.claims)

    def as_dict(self) -> dict:
        return {"schema": 1, "header": _clean(self.header), "claims": [c.as_dict() for c in self.claims],
                "all_pass": self.ok}

    def to_json(self) -> str:
        return dumps(self.as_dict())


def _num(x):
    if x is None:
        return None
    if isinstance(x, bool):
        return x
    if isinstance(x, int):
        return x
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return None
    return float(format(x, ".12g"))


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, float):
        return _num(v)
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        return _clean(v.item())
    return v


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def verdict_log_type(slope, h, tol) -> str:
    return PASS if slope >= h - tol else FAIL


def verdict_exp_type(rmin, rmax, spread) -> str:
    return PASS if rmin > 0 and rmax / rmin <= 1 + spread else FAIL


def verdict_mendoza(slope, h, tol) -> str:
    return PASS if abs(slope - h) <= tol else FAIL


def compare_to_theory(tables, metadata: dict, window=None, tol_log=None, tol_mendoza=None,
                      exp_spread=1.0) -> VerificationReport:
    """Growth claims for census tables against the entropy ``metadata['entropy']``.

    ``tables`` is one CensusTable or a list of them.  For each table the
    report stores (1/n) log count per n, the fitted slope over ``window``,
    the ratio series count * exp(-n h) and its extremes, and three verdicts:

    * log-type:   slope >= h - tol_log            (default tol_log = 0.15)
    * exp-type:   min ratio > 0 and max/min <= 1 + exp_spread
    * mendoza-eq: |slope - h| <= tol_mendoza      (default 2 h / window start)

    Empty or all-zero tables give "inconclusive" verdicts.
    """
    if isinstance(tables, CensusTable):
        tables = [tables]
    h = float(metadata["entropy"])
    rep = VerificationReport(header={"system": metadata})
    for k, t in enumerate(tables):
        suffix = "" if len(tables) == 1 else f"[{k}]"
        nonzero = [n for n, c in t.items() if c > 0]
        lo, hi = window if window is not None else ((min(nonzero), max(nonzero)) if nonzero else (0, 0))
        in_win = [n for n in nonzero if lo <= n <= hi]
        if len(in_win) < 3:
            why = "empty table" if len(t) == 0 else ("all counts zero" if not nonzero else "fewer than 3 nonzero counts in window")
            for cid in ("log-type", "exp-type", "mendoza-eq"):
                rep.add(Claim(cid + suffix, None, h, None, INCONCLUSIVE, "needs >= 3 nonzero counts", {"reason": why}))
            continue
        slope, diag = growth_rate(t, (lo, hi))
        ratios = {n: t.ratio(n, h) for n in in_win}
        rmin, rmax = min(ratios.values()), max(ratios.values())
        tl = 0.15 if tol_log is None else tol_log
        tm = (2 * h / max(lo, 1)) if tol_mendoza is None else tol_mendoza
        common = {"window": [lo, hi], "slope": slope, "per_n": diag["per_point"], "skipped": diag["skipped"],
                  "truncated": t.truncated}
        rep.add(Claim("log-type" + suffix, slope, h, tl, verdict_log_type(slope, h, tl),
                      "computed >= target - tolerance",
                      dict(common, deficit={n: h - v for n, v in diag["per_point"].items()})))
        rep.add(Claim("exp-type" + suffix, rmin, 0.0, exp_spread, verdict_exp_type(rmin, rmax, exp_spread),
                      "min ratio > 0 and max ratio / min ratio <= 1 + tolerance",
                      {"window": [lo, hi], "ratio_min": rmin, "ratio_max": rmax, "ratios": ratios}))
        rep.add(Claim("mendoza-eq" + suffix, slope, h, tm, verdict_mendoza(slope, h, tm),
                      "|computed - target| <= tolerance", common))
    return rep


def prime_orbit_claim(per_period: dict, n: int, h: float, lo=0.95, hi=1.0) -> Claim:
    """Least-period form: per_period[n] * n / exp(n h) in [lo, hi]; the cumulative ratio is reported only."""
    if n not in per_period or per_period[n] == 0:
        return Claim("prime-orbit", None, 1.0, None, INCONCLUSIVE, f"{lo} <= computed <= {hi}",
                     {"reason": f"no orbits of least period {n}"})
    val = math.exp(math.log(per_period[n] * n) - n * h)
    cum = sum(per_period[m] for m in per_period if m <= n)
    cum_ratio = math.exp(math.log(cum) + math.log(n * h) - n * h) if h > 0 else None
    return Claim("prime-orbit", val, 1.0, hi - lo, PASS if lo <= val <= hi else FAIL,
                 f"{lo} <= computed <= {hi}", {"n": n, "per_period": per_period[n], "cumulative": cum,
                                               "cumulative_ratio_unasserted": cum_ratio, "lo": lo, "hi": hi})


def katok_claim(estimate: float, h: float, rel_tol: float, details: dict) -> Claim:
    ok = abs(estimate - h) <= rel_tol * h
    return Claim("katok", estimate, h, rel_tol, PASS if ok else FAIL,
                 "|computed - target| <= tolerance * target", details)


def write_atomic(path: str, text: str):
    """Write via a temporary file in the same directory and rename over the target."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
