"""Angle sequences for the three regimes and their separation certificates.

A certificate ``(C, zeta, t)`` witnesses ``m_j - m_k >= C * zeta**t(k)`` for
``j < k``, where ``m_j = tan(theta_j)``.  All sequence arithmetic runs in
:mod:`mpmath` at :data:`SEQ_PREC` bits because the super-lacunary terms leave
float range after a handful of steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Literal

import mpmath
from mpmath import mpf

if TYPE_CHECKING:
    from .report import Report

SEQ_PREC = 256

# zeta is shrunk to ZETA_SHRINK / e when a regime needs zeta < 1/e
ZETA_SHRINK = 0.9
# target for eta = e * zeta**(2**d - 1) in the power regime
ETA_TARGET = 0.5

LACUNARITY_TOL = 1e-3
LACUNARITY_TAIL = 20


class InvalidSpecError(ValueError):
    pass


@dataclass(frozen=True)
class AngleSequenceSpec:
    """Regime description.

    ``lacunary``: ``lam < m_{j+1}/m_j < mu``.  ``superlacunary``: the same for
    ``m_{j+1}/m_j**d`` with integer ``d > 1``.  ``power``: ``theta_j =
    arctan(a_j ** (j**d))`` with ``0 < d < 1`` and ``a_j`` nonincreasing from
    ``b`` down to ``a``.
    """

    regime: Literal["lacunary", "superlacunary", "power"]
    n: int = 40
    lam: float | None = None
    mu: float | None = None
    m0: float | None = None
    d: float = 1
    a: float | None = None
    b: float | None = None
    ratio: float | None = None  # generator ratio; defaults to sqrt(lam * mu)

    def validate(self) -> None:
        if self.n < 1:
            raise InvalidSpecError("n must be positive")
        if self.regime in ("lacunary", "superlacunary"):
            lam, mu, m0 = self.lam, self.mu, self.m0
            if lam is None or mu is None or m0 is None:
                raise InvalidSpecError("lam, mu and m0 are required")
            if not (0 < lam < mu < 1):
                raise InvalidSpecError("need 0 < lam < mu < 1")
            if not (lam / 2 <= m0 <= lam):
                raise InvalidSpecError("need lam/2 <= m0 <= lam")
            if self.regime == "lacunary" and self.d != 1:
                raise InvalidSpecError("lacunary regime has d = 1")
            if self.regime == "superlacunary" and not (int(self.d) == self.d and self.d > 1):
                raise InvalidSpecError("superlacunary regime needs an integer d > 1")
            if self.ratio is not None and not (lam <= self.ratio <= mu):
                raise InvalidSpecError("generator ratio must lie in [lam, mu]")
        elif self.regime == "power":
            a, b = self.a, self.b if self.b is not None else self.a
            if a is None or not (0 < a <= b < 1):
                raise InvalidSpecError("need 0 < a <= b < 1")
            if not (0 < self.d < 1):
                raise InvalidSpecError("power regime needs 0 < d < 1")
        else:
            raise InvalidSpecError(f"unknown regime {self.regime!r}")

    @property
    def sup_a(self) -> float:
        return self.b if self.b is not None else self.a

    def a_j(self, j: int) -> mpf:
        a, b = mpf(self.a), mpf(self.sup_a)
        return a + (b - a) / (j + 1)


@dataclass(frozen=True)
class AngleSequence:
    tangents: tuple  # m_j = tan(theta_j), mpf
    j0: int = 0

    @property
    def thetas(self) -> tuple:
        with mpmath.workprec(SEQ_PREC):
            return tuple(mpmath.atan(m) for m in self.tangents)

    def __len__(self):
        return len(self.tangents)


@dataclass(frozen=True)
class SeparationCertificate:
    """Constants witnessing ``m_j - m_k >= C * zeta**t(k)``.

    ``t`` is indexed relative to the first certified term; ``j0`` records the
    offset into the original sequence and ``t_form`` names the closed form.
    """

    regime: str
    C: mpf
    zeta: mpf
    t_form: str  # "k", "d^k" or "(k+j0)^d"
    d: float = 1
    beta: float | None = None
    j0: int = 0
    raw_zeta: mpf | None = None  # zeta before any normalising reduction
    notes: tuple = ()

    def t(self, k) -> mpf:
        with mpmath.workprec(SEQ_PREC):
            if self.t_form == "k":
                return mpf(k)
            if self.t_form == "d^k":
                return mpf(int(self.d) ** int(k))
            if self.t_form == "(k+j0)^d":
                return mpf(k + self.j0) ** mpf(self.d)
        raise ValueError(self.t_form)

    def bound(self, k) -> mpf:
        """``C * zeta**t(k)``."""
        with mpmath.workprec(SEQ_PREC):
            return self.C * self.zeta ** self.t(k)

    @property
    def eta(self) -> mpf:
        with mpmath.workprec(SEQ_PREC):
            return mpmath.e * self.zeta ** (mpf(2) ** mpf(self.d) - 1)

    def check_invariants(self) -> list[str]:
        bad = []
        if not self.C > 0:
            bad.append("C must be positive")
        if not 0 < self.zeta < 1:
            bad.append("zeta must lie in (0, 1)")
        if self.regime in ("lacunary", "superlacunary") and not self.zeta < 1 / mpmath.e:
            bad.append("zeta < 1/e required")
        if self.regime == "power" and not self.eta < 1:
            bad.append("eta = e*zeta^(2^d-1) < 1 required")
        return bad


def _power_jd(j: int, d: float) -> bool:
    return j ** d - (j - 1) ** d >= d / (2 * j ** (1 - d))


def _power_jexp(j: int, d: float, b: float) -> bool:
    return (2 / d) * j ** (1 - d) <= 0.5 * b ** (-(j ** d))


def power_j0(d: float, a: float, b: float, horizon: int = 10_000) -> int:
    """Smallest ``j`` from which both power-regime helper inequalities hold up to ``horizon``.

    The threshold ``log_a(log_a e)`` is undefined for ``0 < a < 1``; its
    magnitude ``log_a |log_a e|`` is used as the lower bound instead.
    """
    floor = max(1, math.ceil(math.log(abs(1 / math.log(a))) / math.log(a)))
    good = [_power_jd(j, d) and _power_jexp(j, d, b) for j in range(1, horizon + 1)]
    j0 = horizon
    for j in range(horizon, 0, -1):
        if not good[j - 1]:
            break
        j0 = j
    return max(j0, floor)


def generate(spec: AngleSequenceSpec) -> AngleSequence:
    spec.validate()
    with mpmath.workprec(SEQ_PREC):
        if spec.regime in ("lacunary", "superlacunary"):
            q = mpf(spec.ratio) if spec.ratio is not None else mpmath.sqrt(mpf(spec.lam) * mpf(spec.mu))
            d = int(spec.d)
            ms = [mpf(spec.m0)]
            for _ in range(spec.n - 1):
                ms.append(q * ms[-1] ** d)
            return AngleSequence(tuple(ms), 0)
        j0 = power_j0(spec.d, spec.a, spec.sup_a)
        dd = mpf(spec.d)
        ms = tuple(spec.a_j(j) ** (mpf(j) ** dd) for j in range(j0, j0 + spec.n))
        return AngleSequence(ms, j0)


def derive_certificate(spec: AngleSequenceSpec, normalize: bool = False) -> SeparationCertificate:
    """Regime constants.

    With ``normalize`` the rate ``zeta`` is reduced (which only weakens the
    separation requirement) until ``zeta < 1/e`` (lacunary regimes) or
    ``eta <= ETA_TARGET`` (power regime).  In the power regime ``t`` is
    always re-indexed to the first certified term ``j0``, so ``t(k) = (k+j0)**d``.
    """
    spec.validate()
    with mpmath.workprec(SEQ_PREC):
        if spec.regime == "lacunary":
            C = mpf(spec.m0) * (1 / mpf(spec.mu) - 1) / 2
            cert = SeparationCertificate("lacunary", C, mpf(spec.lam), "k", 1, 1.0, 0)
        elif spec.regime == "superlacunary":
            d = int(spec.d)
            C = (mpf(spec.mu) ** (-1 / mpf(d - 1)) - 1) / 2
            cert = SeparationCertificate("superlacunary", C, (mpf(spec.lam) / 2) ** 2, "d^k", d, None, 0)
        else:
            zeta = mpf(spec.a) * mpf(spec.sup_a)
            j0 = power_j0(spec.d, spec.a, spec.sup_a)
            form = "(k+j0)^d"
            cert = SeparationCertificate("power", mpf(2), zeta, form, spec.d, 1 / spec.d, j0)
        if not normalize:
            return cert
        zeta, notes = cert.zeta, []
        if spec.regime in ("lacunary", "superlacunary"):
            cap = ZETA_SHRINK / mpmath.e
        else:
            cap = (ETA_TARGET / mpmath.e) ** (1 / (mpf(2) ** mpf(spec.d) - 1))
        if zeta > cap:
            notes.append(f"zeta reduced from {mpmath.nstr(zeta, 6)} to {mpmath.nstr(cap, 6)}")
            zeta = cap
        return replace(cert, zeta=zeta, raw_zeta=cert.zeta, notes=tuple(notes))


def verify_certificate(seq: AngleSequence, cert: SeparationCertificate, upto: int,
                       tolerance: float = 0.0) -> "Report":
    """Exhaustive pair check of the separation hypothesis on ``0 <= j < k <= upto``.

    Also checks ``tan(theta_j - theta_k) >= (m_j - m_k) / 2``.  Indices are
    relative to the first term of ``seq``.
    """
    from .report import ANCHORS, Report, Row, relative_margin

    if len(seq) < upto + 1:
        raise ValueError(f"sequence has {len(seq)} terms, need {upto + 1}")
    rep = Report("certificate")
    worst = None
    with mpmath.workprec(SEQ_PREC):
        ms = seq.tangents
        for k in range(1, upto + 1):
            need = cert.bound(k)
            for j in range(k):
                gap = ms[j] - ms[k]
                rel = relative_margin(need, gap)
                ok = rel >= -tolerance
                tan_gap = gap / (1 + ms[j] * ms[k])
                ok_tan = tan_gap >= gap / 2 or ms[j] > 1
                if worst is None or rel < worst[0]:
                    worst = (rel, j, k)
                if not ok or not ok_tan:
                    rep.add(Row("separation", ANCHORS["separation"], need, gap, rel, False, tolerance=tolerance,
                                detail=f"j={j} k={k}", k=k, regime=cert.regime))
                    return rep
        if worst is not None:
            rel, j, k = worst
            rep.add(Row("separation", ANCHORS["separation"], cert.bound(k), ms[j] - ms[k], rel, True,
                        tolerance=tolerance, detail=f"worst pair j={j} k={k}; {upto * (upto + 1) // 2} pairs",
                        k=k, regime=cert.regime))
    return rep


@dataclass(frozen=True)
class Lacunarity:
    lacunary: bool
    liminf: float | None = None
    limsup: float | None = None
    degenerate: bool = False


def check_lacunarity(seq: AngleSequence, tail: int = LACUNARITY_TAIL,
                     tol: float = LACUNARITY_TOL) -> Lacunarity:
    """Estimate the tail limits of ``m_{j+1} / m_j``."""
    if len(seq) < 10:
        raise ValueError("need at least 10 terms")
    ms = seq.tangents[-(tail + 1):]
    with mpmath.workprec(SEQ_PREC):
        ratios = [float(b / a) for a, b in zip(ms, ms[1:])]
    lo, hi = min(ratios), max(ratios)
    if hi > 1 - tol:
        return Lacunarity(False, lo, hi)
    return Lacunarity(True, lo, hi, degenerate=lo < 1e-6)


DEFAULT_SPECS = {
    "lacunary": AngleSequenceSpec("lacunary", n=24, lam=0.4, mu=0.6, m0=0.4),
    "superlacunary": AngleSequenceSpec("superlacunary", n=14, lam=0.4, mu=0.5, m0=0.4, d=3),
    "power": AngleSequenceSpec("power", n=40, d=0.5, a=0.5, b=0.5),
}
