"""Orlicz functions: evaluation, numeric complementary function, Delta_2 test, simple-function integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Sequence

import mpmath
import numpy as np

from . import geom

DEFAULT_CAP = 1e16
TERNARY_ITERS = 200


class UnboundedConjugate(ArithmeticError):
    """The sup defining the complementary function is not attained below the cap."""


class UnsupportedInput(ValueError):
    pass


def _log_plus(t):
    if isinstance(t, mpmath.mpf):
        return mpmath.log(t) if t > 1 else mpmath.mpf(0)
    return math.log(t) if t > 1 else 0.0


@dataclass(frozen=True)
class OrliczFunction:
    """Catalog entry.

    ``power``: ``t**p``.  ``phi_beta``: ``t (1 + log_+^beta t)``.  ``loglog``:
    ``t (1 + log_+ log_+ t)``.  ``exponential``: ``e^t - 1``.  ``tabulated``:
    piecewise-linear through ``samples`` (which must start at ``(0, 0)``),
    continued with the last slope.  ``scale`` multiplies the whole function.
    """

    kind: Literal["power", "phi_beta", "loglog", "exponential", "tabulated"]
    param: float = 1.0
    samples: tuple = ()
    scale: float = 1.0

    @property
    def name(self) -> str:
        if self.kind == "power":
            return "identity" if self.param == 1 and self.scale == 1 else f"t^{self.param:g}"
        if self.kind == "phi_beta":
            return f"Phi_{self.param:g}"
        return self.kind

    def __call__(self, t):
        if t < 0:
            raise ValueError("Orlicz functions are evaluated on t >= 0")
        try:
            return self.scale * self._eval(t)
        except OverflowError:
            return math.inf

    def _eval(self, t):
        if self.kind == "power":
            return t ** self.param
        if self.kind == "phi_beta":
            lp = _log_plus(t)
            return t * (1 + lp ** self.param)
        if self.kind == "loglog":
            return t * (1 + _log_plus(_log_plus(t)))
        if self.kind == "exponential":
            return mpmath.expm1(t) if isinstance(t, mpmath.mpf) else math.expm1(t)
        if self.kind == "tabulated":
            ts = [s[0] for s in self.samples]
            vs = [s[1] for s in self.samples]
            if t >= ts[-1]:
                slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])
                return vs[-1] + slope * (t - ts[-1])
            return float(np.interp(float(t), ts, vs))
        raise ValueError(self.kind)

    def is_convex_on(self, grid: Sequence[float], tol: float = 1e-10) -> bool:
        """Discrete second differences on a (possibly non-uniform) grid."""
        xs = list(grid)
        ys = [float(self(x)) for x in xs]
        for i in range(1, len(xs) - 1):
            s1 = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])
            s2 = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
            if s2 - s1 < -tol * max(1.0, abs(s1)):
                return False
        return True


def evaluate(phi: OrliczFunction, t):
    """``phi(t)`` for ``t >= 0``."""
    return phi(t)


def is_little_o(psi, phi, t_max: float = 1e12, eps: float = 1e-3, n: int = 200) -> bool:
    """``psi = o(phi)`` at infinity, read as ``psi/phi < eps`` over the top two decades below ``t_max``."""
    ts = np.geomspace(t_max / 100, t_max, n)
    return all(float(psi(float(t))) / float(phi(float(t))) < eps for t in ts)


def identity() -> OrliczFunction:
    return OrliczFunction("power", 1.0)


def phi_beta(beta: float) -> OrliczFunction:
    return OrliczFunction("phi_beta", float(beta))


def loglog() -> OrliczFunction:
    return OrliczFunction("loglog")


def exponential() -> OrliczFunction:
    return OrliczFunction("exponential")


def power(p: float, scale: float = 1.0) -> OrliczFunction:
    return OrliczFunction("power", float(p), scale=scale)


def by_name(name: str) -> OrliczFunction:
    """Parse ``identity``, ``loglog``, ``exponential``, ``Phi_<beta>`` or ``t^<p>``."""
    if name == "identity":
        return identity()
    if name == "loglog":
        return loglog()
    if name == "exponential":
        return exponential()
    if name.startswith("Phi_"):
        return phi_beta(float(name[4:]))
    if name.startswith("t^"):
        return power(float(name[2:]))
    raise KeyError(name)


def regime_target(regime: str, d: float = 1) -> OrliczFunction:
    """Orlicz function a regime differentiates: L log L, L log log L, L log^{1/d} L."""
    if regime == "lacunary":
        return phi_beta(1)
    if regime == "superlacunary":
        return loglog()
    if regime == "power":
        return phi_beta(1 / d)
    raise ValueError(regime)


@dataclass(frozen=True)
class Conjugate:
    value: float
    argmax: float
    interior: bool


OBJ_PREC = 128
LOG_T_MIN = -690.0
LOG_T_MAX = 1e7
FLOAT_LOG_MAX = 700.0


def conjugate_full(phi: OrliczFunction, s: float, domain_cap=DEFAULT_CAP) -> Conjugate:
    """``sup{s t - phi(t) : 0 <= t <= domain_cap}`` by ternary search in ``log t``.

    ``t -> s t - phi(t)`` is concave, so it stays unimodal after the monotone
    change of variable ``t = e^u``.  The objective is evaluated in mpmath so
    maximisers far outside float range are reachable.  With ``domain_cap =
    inf`` the bracket is grown until the objective turns down.  Raises
    :class:`UnboundedConjugate` when the maximiser sits at the cap and the
    objective is still increasing there.  Values outside float range are
    returned as mpf.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    s = float(s)

    def obj(u):
        if u < FLOAT_LOG_MAX:
            t = math.exp(u)
            v = phi(t)
            return -math.inf if v == math.inf else s * t - float(v)
        with mpmath.workprec(OBJ_PREC):
            t = mpmath.exp(u)
            return s * t - phi(t)

    lo = LOG_T_MIN
    if domain_cap == math.inf:
        hi = 40.0
        while obj(hi) > obj(hi - 1):
            if hi > LOG_T_MAX:
                raise UnboundedConjugate(f"sup for s={s} not attained below e^{LOG_T_MAX:g}")
            hi *= 2
    else:
        hi = math.log(domain_cap)
    cap_u = hi
    for _ in range(TERNARY_ITERS):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if obj(m1) < obj(m2):
            lo = m1
        else:
            hi = m2
    u = (lo + hi) / 2
    best = obj(u)
    arg = math.exp(u) if u < FLOAT_LOG_MAX else mpmath.exp(u)
    if best <= 0:
        best, arg = 0.0, 0.0
    at_cap = u >= cap_u - 1e-9 * max(1.0, abs(cap_u))
    if at_cap and obj(cap_u) > obj(cap_u - 1e-6):
        raise UnboundedConjugate(f"sup for s={s} not attained below cap e^{cap_u:.6g}")
    return Conjugate(best, arg, not at_cap)


def conjugate(phi: OrliczFunction, s: float, domain_cap=DEFAULT_CAP):
    return conjugate_full(phi, s, domain_cap).value


@dataclass(frozen=True)
class ConjugateFunction:
    """Complementary function of ``base`` as a callable (cached per argument)."""

    base: OrliczFunction
    domain_cap: float = DEFAULT_CAP  # math.inf lifts the cap

    @property
    def name(self) -> str:
        return f"conj({self.base.name})"

    def __call__(self, s):
        return _cached_conjugate(self.base, float(s), float(self.domain_cap))


def regime_conjugate(regime: str, d: float = 1) -> ConjugateFunction:
    """Uncapped complementary function of the regime's target.

    The loglog maximiser at ``s`` is about ``exp(e**(s - 1))``, so no fixed cap
    covers the depths that occur in a family.
    """
    return ConjugateFunction(regime_target(regime, d), math.inf)


def resolve(name: str, regime: str, d: float = 1):
    """Catalog name, or ``conjugate`` / ``target`` for the regime's pair."""
    if name == "conjugate":
        return regime_conjugate(regime, d)
    if name == "target":
        return regime_target(regime, d)
    return by_name(name)


@lru_cache(maxsize=4096)
def _cached_conjugate(phi, s, cap):
    return conjugate(phi, s, cap)


def smallest_exp_constant(psi, smax: float = 30.0, n: int = 3001, power_of_s: float = 1.0) -> float:
    """Smallest ``K`` with ``psi(s) <= K exp(s**power_of_s)`` on a grid of ``[0, smax]``."""
    return smallest_growth_constant(psi, lambda s: math.exp(s ** power_of_s), smax, n)


def smallest_growth_constant(psi, growth, smax: float, n: int = 3001) -> float:
    """Smallest ``K`` with ``psi(s) <= K growth(s)`` on a uniform grid of ``[0, smax]``."""
    grid = np.linspace(0.0, smax, n)
    return max(float(psi(float(s)) / growth(float(s))) for s in grid)


@dataclass(frozen=True)
class Delta2:
    satisfied: bool
    K: float | None = None
    witness: float | None = None


def delta2_check(phi: OrliczFunction, t_min: float, t_max: float, n: int = 400) -> Delta2:
    """Sup of ``phi(2t)/phi(t)`` on a log grid, or the point past which it keeps growing.

    The ratio is declared divergent when it increases over the whole upper half
    of the grid and ends more than twice its midpoint value.
    """
    if not 0 < t_min < t_max:
        raise ValueError("need 0 < t_min < t_max")
    ts = np.geomspace(t_min, t_max, n)
    ratios = []
    for t in ts:
        a, b = phi(float(t)), phi(2 * float(t))
        ratios.append(math.inf if a == 0 or b == math.inf else float(b) / float(a))
    upper = ratios[n // 2:]
    growing = all(y >= x for x, y in zip(upper, upper[1:]))
    if growing and (upper[-1] == math.inf or upper[-1] > 2 * upper[0]):
        return Delta2(False, witness=float(ts[n // 2]))
    return Delta2(True, K=max(ratios))


@dataclass(frozen=True)
class SimpleFunction:
    """``sum_i c_i chi_{region_i}`` with regions that are disks or convex polygons."""

    terms: tuple  # of (coefficient, region)

    def __post_init__(self):
        for c, _ in self.terms:
            if not c > 0:
                raise ValueError("coefficients must be positive")


def _measure(region):
    if isinstance(region, geom.Disk):
        return region.area
    return geom.area(region)


def _overlap(a, b):
    if isinstance(a, geom.Disk) and isinstance(b, geom.Disk):
        lib = geom._lib(a.radius, b.radius)
        dist = lib.sqrt((a.center.x - b.center.x) ** 2 + (a.center.y - b.center.y) ** 2)
        return dist < a.radius + b.radius
    if isinstance(a, geom.Disk):
        return geom.disk_polygon_area(a, b) > 0
    if isinstance(b, geom.Disk):
        return geom.disk_polygon_area(b, a) > 0
    return geom.intersect_convex(a, b) is not None


def integral(phi, f: SimpleFunction):
    """``int phi(f)`` for a simple function with pairwise disjoint regions."""
    regions = [r for _, r in f.terms]
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            if _overlap(regions[i], regions[j]):
                raise UnsupportedInput("regions must be pairwise disjoint")
    return sum((phi(c) * _measure(r) for c, r in f.terms), 0)


def level_integral(phi, levels: dict):
    """``int phi(chi) = sum_m phi(m) |{chi = m}|`` from an exact depth histogram."""
    return sum((phi(m) * v for m, v in sorted(levels.items())), 0)
