"""Verification report rows and their CSV/JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import mpmath

# Anchor strings carried by report rows; each names the statement a row checks.
ANCHORS = {
    "separation": "Lemma A hypothesis, m_j - m_k >= C zeta^{t_k}",
    "disjointness": "Lemma 2, r_theta Q_+ disjoint",
    "lemmaA.i": "Lemma A (i), 0 < 2l_k < L_k <= eps",
    "lemmaA.ii": "Lemma A (ii), c(C) zeta^{-t_2k} <= L_k/l_k <= d(C) zeta^{-t_2k}",
    "lemmaA.iii": "Lemma A (iii), |U r_theta Q_k| >= k/2 |Q_k|",
    "lemmaA.iv": "Lemma A (iv), e(C) |Q_k| zeta^{t_2k}",
    "lemmaA.claim": "Lemma A proof Claim, |{chi = j+1}|",
    "propB.i": "Proposition B (i), |Y_k| >= gamma(C) k zeta^{-t_2k} |Theta_k|",
    "propB.ii": "Proposition B (ii), gamma'(C) zeta^{t_2k}",
    "propB.iii": "Proposition B (iii), equal areas",
    "remark.ii'": "Remark (ii'), M chi_Theta_k >= gamma'(C) zeta^{t_2k}",
    "propC.claim1": "Proposition C Claim 1, gamma_1(beta, C, zeta, M) int Phi_beta(f_k)",
    "propC.claim2": "Proposition C Claim 2, lim int Phi_beta / int Phi(T f_k) = infinity",
    "stok.i": "Lemma A-Stok (i), equal area",
    "stok.ii": "Lemma A-Stok (ii), int Psi(sum chi_R) <= c1 sum |R|",
    "stok.iii": "Lemma A-Stok (iii), |R cap B_k|/|R| >= c2/lambda_n",
    "stok.iv": "Lemma A-Stok (iv), |U R_k| >= c3 Phi(lambda_k)|E_k|",
    "lacunary.bound": "lacunary regime, <= 2K1'/(1-zeta) |Q_k|",
    "superlacunary.factor": "superlacunary regime, lim exp[e^{k+1}+d^k-d^{2k}] = 0",
    "power.factor": "power regime, (k+1)^2 eta^{k^d} -> 0",
    "kakeya": "Kakeya ratio, |U R_N| <= 1/N |U R*|, = 1/3 > 1/4",
    "orlicz": "Orlicz complementary function, Psi(s) = sup{ts - Phi(t)}",
}


def fmt(x) -> str:
    """Render a number without losing magnitude when it is outside float range."""
    if isinstance(x, mpmath.mpf):
        f = float(x)
        if f != 0 and abs(f) != float("inf") or x == 0:
            return repr(f)
        return mpmath.nstr(x, 17)
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, (int, float)):
        return repr(x)
    return str(x)


def relative_margin(lhs, rhs):
    """``(rhs - lhs) / max(|lhs|, |rhs|)``: nonnegative iff ``lhs <= rhs``."""
    scale = max(abs(lhs), abs(rhs))
    if scale == 0:
        return 0.0
    return (rhs - lhs) / scale


@dataclass
class Row:
    check: str
    anchor: str
    lhs: object
    rhs: object
    margin: object
    passed: bool
    method: str = "exact"
    tolerance: float = 0.0
    detail: str = ""
    seed: int | None = None
    k: int | None = None
    regime: str = ""

    @classmethod
    def leq(cls, check: str, lhs, rhs, tolerance: float, **kw) -> "Row":
        """Row asserting ``lhs <= rhs`` up to a relative tolerance."""
        m = relative_margin(lhs, rhs)
        return cls(check, ANCHORS.get(check, check), lhs, rhs, m, bool(m >= -tolerance),
                   tolerance=tolerance, **kw)

    @classmethod
    def lt(cls, check: str, lhs, rhs, **kw) -> "Row":
        """Row asserting the strict inequality ``lhs < rhs``."""
        m = relative_margin(lhs, rhs)
        return cls(check, ANCHORS.get(check, check), lhs, rhs, m, bool(m > 0), **kw)

    @classmethod
    def flag(cls, check: str, value, ok: bool, **kw) -> "Row":
        """Row recording a yes/no property of ``value``."""
        return cls(check, ANCHORS.get(check, check), value, "", 0.0 if ok else -1.0, bool(ok), **kw)

    @classmethod
    def close(cls, check: str, lhs, rhs, tolerance: float, **kw) -> "Row":
        """Row asserting ``lhs == rhs`` up to a relative tolerance."""
        m = -abs(relative_margin(lhs, rhs))
        return cls(check, ANCHORS.get(check, check), lhs, rhs, m, bool(m >= -tolerance),
                   tolerance=tolerance, **kw)


@dataclass
class Report:
    name: str
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    data: dict = field(default_factory=dict)  # structured extras (constants, series)

    def add(self, row: Row) -> Row:
        self.rows.append(row)
        return row

    def extend(self, other: "Report") -> "Report":
        self.rows.extend(other.rows)
        self.notes.extend(other.notes)
        self.data.update(other.data)
        return self

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]

    def worst(self, check: str | None = None) -> Row | None:
        rows = [r for r in self.rows if check is None or r.check == check]
        return min(rows, key=lambda r: r.margin, default=None)

    COLUMNS = ("check", "anchor", "regime", "k", "lhs", "rhs", "margin", "passed",
               "method", "tolerance", "seed", "detail")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        text = ("check", "anchor", "method", "detail", "regime")
        for r in self.rows:
            vals = [getattr(r, c) for c in self.COLUMNS]
            w.writerow(["" if v is None else v if c in text else fmt(v) for c, v in zip(self.COLUMNS, vals)])
        return buf.getvalue()

    def summary(self) -> dict:
        by_check: dict = {}
        for r in self.rows:
            s = by_check.setdefault(r.check, {"anchor": r.anchor, "rows": 0, "failed": 0})
            s["rows"] += 1
            s["failed"] += not r.passed
        return {"name": self.name, "passed": self.passed, "rows": len(self.rows),
                "failed": len(self.failures()), "checks": by_check, "notes": list(self.notes)}

    def to_json(self, **extra) -> str:
        return json.dumps({**self.summary(), **extra}, indent=2, sort_keys=True)
