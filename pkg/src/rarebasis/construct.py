"""Rotated-interval families ``{r_theta Q_k}`` and checks of their geometric estimates.

The intervals built here are extremely eccentric (``L/ell`` grows like
``zeta**-t(2k)``), so the exact geometry is done in :mod:`mpmath`.  Two
rectangles of a family only meet near the origin, inside a region whose size
is governed by the angle gap rather than by ``L``.  :class:`TruncatedFamily`
therefore clips the rectangles cut down to a window around the origin and adds
back the tails as depth-one area, after certifying from the computed pairwise
intersections that no tail meets another rectangle.  The working precision
then scales with ``log(1/gap)`` instead of ``log(L/ell)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import mpmath
import numpy as np
from mpmath import mpf

from . import geom, orlicz
from .angles import SEQ_PREC, AngleSequence, SeparationCertificate
from .report import Report, Row

MAX_K = 20
DEFAULT_PHIS = ("identity", "conjugate", "exponential")
MAX_GEOM_PREC = 1 << 20
HALF_DIRECT_PREC = 4096
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class DerivedConstants:
    C: mpf
    cC: mpf
    dC: mpf
    eC: mpf
    gamma: mpf
    gamma_prime: mpf

    @property
    def gamma_dprime(self) -> mpf:
        return self.eC

    @classmethod
    def from_C(cls, C) -> "DerivedConstants":
        with mpmath.workprec(SEQ_PREC):
            C = mpf(C)
            cC = 4 / C
            dC = 2 * mpmath.sqrt(1 + 4 / C ** 2)
            eC = 2 / (C * cC)
            return cls(C, cC, dC, eC, cC / (2 * mpmath.pi), mpmath.pi / (4 * dC))


def shape_ratio(cert: SeparationCertificate, k: int) -> mpf:
    """``L/ell`` solving ``(L/ell)**2 = 4 + 16 C**-2 zeta**(-2 t(2k))``."""
    with mpmath.workprec(SEQ_PREC):
        return mpmath.sqrt(4 + 16 / cert.C ** 2 * cert.zeta ** (-2 * cert.t(2 * k)))


def build_interval(cert: SeparationCertificate, k: int, epsilon) -> tuple:
    """``(L_k, ell_k)`` with ``L_k = epsilon`` and the prescribed shape."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    with mpmath.workprec(SEQ_PREC):
        L = mpf(epsilon)
        return L, L / shape_ratio(cert, k)


@dataclass
class Construction:
    k: int
    L: mpf
    ell: mpf
    tangents: tuple  # tan of theta_0 > ... > theta_k
    cert: SeparationCertificate
    epsilon: mpf

    def __post_init__(self):
        if len(self.tangents) != self.k + 1:
            raise ValueError("a construction uses exactly k+1 angles")

    @property
    def constants(self) -> DerivedConstants:
        return DerivedConstants.from_C(self.cert.C)

    @property
    def t2k(self) -> mpf:
        return self.cert.t(2 * self.k)

    @property
    def zeta_t2k(self) -> mpf:
        """``zeta ** t(2k)``."""
        with mpmath.workprec(SEQ_PREC):
            return self.cert.zeta ** self.t2k

    @property
    def Q_area(self) -> mpf:
        with mpmath.workprec(SEQ_PREC):
            return self.L * self.ell

    @property
    def Theta(self) -> geom.Disk:
        zero = mpf(0)
        return geom.Disk(geom.Point(zero, zero), self.ell)

    @property
    def theta_subset(self) -> tuple:
        with mpmath.workprec(SEQ_PREC):
            return tuple(mpmath.atan(m) for m in self.tangents)

    @property
    def Y_k_area(self) -> mpf:
        """``|Y_k|``, the exact area of the union of the family."""
        return self.geometry.union()

    @property
    def Theta_area(self) -> mpf:
        with mpmath.workprec(SEQ_PREC):
            return mpmath.pi * self.ell ** 2

    def rects(self) -> list:
        with mpmath.workprec(SEQ_PREC):
            return [geom.RotatedRect(self.L, self.ell, mpmath.atan(m)) for m in self.tangents]

    @cached_property
    def geometry(self) -> "FamilyGeometry":
        return FamilyGeometry(self)

    def subset_tangents(self, mask: int) -> list:
        return [m for i, m in enumerate(self.tangents) if mask >> i & 1]


def build_construction(seq: AngleSequence, cert: SeparationCertificate, k: int, epsilon) -> Construction:
    if k > MAX_K:
        raise geom.CapacityError(f"k={k} exceeds exact-geometry capacity {MAX_K}")
    if len(seq) < k + 1:
        raise ValueError(f"sequence has {len(seq)} terms; k={k} needs {k + 1}")
    L, ell = build_interval(cert, k, epsilon)
    return Construction(k, L, ell, tuple(seq.tangents[: k + 1]), cert, mpf(epsilon))


def build_nested_family(seq: AngleSequence, cert: SeparationCertificate, kmax: int) -> list:
    """``Q_1`` with ``epsilon = 1``, then ``Q_{k+1}`` with ``epsilon = min(ell_k, 1/k)``."""
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    out = [build_construction(seq, cert, 1, 1)]
    for k in range(1, kmax):
        with mpmath.workprec(SEQ_PREC):
            eps = min(out[-1].ell, mpf(1) / k)
        out.append(build_construction(seq, cert, k + 1, eps))
    return out


def _sin_gap(mi, mj):
    """``sin(theta_i - theta_j)`` from the tangents."""
    return (mi - mj) / mpmath.sqrt((1 + mi * mi) * (1 + mj * mj))


class TruncatedFamily:
    """Exact depth measures of ``{r_theta([x0, x1] x [0, ell])}`` for origin-anchored angles.

    Requires ``x0 <= 0 < x1`` so every pairwise intersection contains the origin.
    Each side farther than ``2 * cut`` from the origin is replaced by a window
    edge at ``+-cut``; the discarded tails are certified disjoint from every
    other member and re-enter as depth-1 area.
    """

    def __init__(self, tangents: Sequence, x0, x1, ell):
        self.tangents = tuple(tangents)
        self.n = len(self.tangents)
        with mpmath.workprec(SEQ_PREC):
            x0, x1, ell = mpf(x0), mpf(x1), mpf(ell)
            if not (x0 <= 0 < x1 and ell > 0):
                raise ValueError("need x0 <= 0 < x1 and ell > 0")
            if self.n > 1:
                gap = min(_sin_gap(a, b) for a, b in zip(self.tangents, self.tangents[1:]))
                if not gap > 0:
                    raise geom.InvalidFamilyError("angles must be strictly decreasing")
            else:
                gap = mpf(1)
            cut = 4 * ell / gap + 2 * ell
            self.hi = cut if x1 > 2 * cut else x1
            self.lo = -cut if x0 < -2 * cut else x0
            self.truncated = bool(self.hi < x1 or self.lo > x0)
            self.tail = ((x1 - self.hi) + (self.lo - x0)) * ell
            bits = 2 * int(mpmath.ceil(mpmath.log((self.hi - self.lo) / ell, 2))) + 128
        if bits > MAX_GEOM_PREC:
            raise geom.CapacityError(f"required working precision {bits} bits exceeds {MAX_GEOM_PREC}")
        self.prec = max(bits, 53)
        self.x0, self.x1, self.ell = x0, x1, ell
        with mpmath.workprec(self.prec):
            self.thetas = [mpmath.atan(m) for m in self.tangents]
            self.polys = [geom.rect_polygon(t, self.lo, self.hi, mpf(0), ell) for t in self.thetas]
            self.inter = _intersections(self.polys)
            self.areas = [geom.area(p) for p in self.inter]
        self.certified = self._certify() if self.truncated else True
        if not self.certified:
            raise geom.CapacityError("tail truncation could not be certified for this family")

    def _certify(self) -> bool:
        """Every pairwise intersection is nonempty and stays inside half the window."""
        with mpmath.workprec(self.prec):
            hi = self.hi / 2 if self.hi < self.x1 else None
            lo = self.lo / 2 if self.lo > self.x0 else None
            dirs = [(mpmath.cos(t), mpmath.sin(t)) for t in self.thetas]
            for i in range(self.n):
                for j in range(i + 1, self.n):
                    p = self.inter[(1 << i) | (1 << j)]
                    if p is None:
                        return False
                    for v in p:
                        for cx, sx in (dirs[i], dirs[j]):
                            u = v.x * cx + v.y * sx
                            if (hi is not None and u > hi) or (lo is not None and u < lo):
                                return False
        return True

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def level_ge(self, members: int | None = None) -> dict:
        """``{m: |{chi >= m}|}`` for the sub-family ``members`` (bitmask)."""
        members = self.full if members is None else members
        with mpmath.workprec(self.prec):
            ge = geom.depth_measures(self.areas, members)
            ge[1] = ge[1] + bin(members).count("1") * self.tail
        return ge

    def levels(self, members: int | None = None) -> dict:
        with mpmath.workprec(self.prec):
            return geom.exact_levels(self.level_ge(members))

    def union(self, members: int | None = None) -> mpf:
        return self.level_ge(members)[1]

    def rect_area(self, i: int) -> mpf:
        with mpmath.workprec(self.prec):
            return geom.area(self.polys[i]) + self.tail

    def intersection(self, mask: int) -> mpf:
        return self.areas[mask]


class FamilyGeometry(TruncatedFamily):
    """Exact measures for a construction's rectangle family ``{r_theta Q_k}``."""

    def __init__(self, c: Construction):
        self.c = c
        self.halfrect_pair_max = None  # set by halfrect_union
        super().__init__(c.tangents, 0, c.L, c.ell)

    def disk_ratio(self, i: int) -> mpf:
        """``|R_i cap Theta_k| / |R_i|``; the disk lies within the truncated part."""
        with mpmath.workprec(self.prec):
            return geom.disk_polygon_area(self.c.Theta, self.polys[i]) / (self.c.L * self.c.ell)

    def halfrect_union(self) -> geom.Measure:
        """Area of the union of the right halves ``r_theta([L/2, L] x [0, ell])``.

        Clipped directly when the precision allows it; otherwise the value follows
        from the truncation certificate (the halves lie inside disjoint tails).
        """
        c = self.c
        with mpmath.workprec(SEQ_PREC):
            bits = 2 * int(mpmath.ceil(mpmath.log(c.L / c.ell, 2))) + 128
        if bits <= HALF_DIRECT_PREC:
            with mpmath.workprec(bits):
                zero = mpf(0)
                polys = [geom.rect_polygon(mpmath.atan(m), c.L / 2, c.L, zero, c.ell) for m in c.tangents]
                inter = _intersections(polys)
                areas = [geom.area(p) for p in inter]
                u = geom.depth_measures(areas, (1 << self.n) - 1)[1]
                pair_max = max((areas[(1 << i) | (1 << j)] for i in range(self.n) for j in range(i + 1, self.n)),
                               default=mpf(0))
            self.halfrect_pair_max = pair_max
            return geom.Measure(u, 0.0, "exact")
        if self.truncated and self.certified and self.hi <= c.L / 2:
            self.halfrect_pair_max = mpf(0)
            with mpmath.workprec(SEQ_PREC):
                return geom.Measure(self.n * c.L * c.ell / 2, 0.0, "certified-truncation")
        raise geom.CapacityError("half-rectangle union not computable at this scale")

    def monte_carlo(self, samples: int, seed: int):
        """Independent oracle: union and depth histogram in units of ``|Q|``."""
        return geom.mc_rect_family(self.c.tangents, self.c.L / self.c.ell, samples, seed)


def _intersections(polys):
    n = len(polys)
    if n > geom.MAX_EXACT_POLYGONS:
        raise geom.CapacityError(f"{n} polygons exceeds exact capacity")
    inter = [None] * (1 << n)
    for mask in range(1, 1 << n):
        top = mask.bit_length() - 1
        rest = mask ^ (1 << top)
        inter[mask] = polys[top] if rest == 0 else geom.intersect_convex(inter[rest], polys[top])
    return inter


def contiguous_masks(n: int) -> list:
    return [((1 << (b + 1)) - 1) ^ ((1 << a) - 1) for a in range(n) for b in range(a, n)]


def sample_masks(n: int, count: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        bits = rng.integers(0, 2, size=n)
        mask = int(sum(int(b) << i for i, b in enumerate(bits)))
        if mask:
            out.append(mask)
    return out


def overlap_rhs(c: Construction, phi, mask: int) -> mpf:
    """``e(C) |Q_k| zeta^{t(2k)} sum_j phi(j+1) sum_{r>=j} zeta^{-t(i_r)}``."""
    idx = [i for i in range(c.k + 1) if mask >> i & 1]
    with mpmath.workprec(SEQ_PREC):
        inv = [c.cert.zeta ** (-c.cert.t(i)) for i in idx]
        total = mpf(0)
        for j in range(len(idx)):
            total += phi(j + 1) * mpmath.fsum(inv[j:])
        return c.constants.eC * c.Q_area * c.zeta_t2k * total


def level_rhs(c: Construction, mask: int, j: int) -> mpf:
    """``ell^2 sum_s 1/tan(alpha_s - alpha_{s+j})`` over the sub-family ``mask``."""
    ms = c.subset_tangents(mask)
    with mpmath.workprec(SEQ_PREC):
        tot = mpf(0)
        for s in range(len(ms) - j):
            tan_gap = (ms[s] - ms[s + j]) / (1 + ms[s] * ms[s + j])
            tot += 1 / tan_gap
        return c.ell ** 2 * tot


def default_masks(n: int, random_subsets: int, seed: int, exhaustive: bool = False) -> list:
    if exhaustive:
        return list(range(1, 1 << n))
    masks = contiguous_masks(n)
    seen = set(masks)
    for m in sample_masks(n, random_subsets, seed):
        masks.append(m)
        seen.add(m)
    return masks


def _phis(c: Construction, phis):
    if phis is None:
        phis = DEFAULT_PHIS
    return [orlicz.resolve(p, c.cert.regime, c.cert.d) if isinstance(p, str) else p for p in phis]


def verify_lemmaA(c: Construction, phis: Sequence | None = None, *, random_subsets: int = 100, seed: int = 0,
                  tolerance: float = DEFAULT_TOL, exhaustive: bool | None = None) -> Report:
    """Items (i)-(iv) of the interval lemma, plus the level-set claim, with exact geometry.

    ``phis`` holds callables or catalog names (``conjugate`` is the regime's
    complementary function); ``None`` means :data:`DEFAULT_PHIS`.
    """
    if c.k > MAX_K:
        raise geom.CapacityError(f"k={c.k} exceeds {MAX_K}")
    reg, k = c.cert.regime, c.k
    rep = Report(f"lemmaA k={k}")
    kw = dict(k=k, regime=reg)
    K = c.constants
    with mpmath.workprec(SEQ_PREC):
        rep.add(Row.leq("lemmaA.i", 2 * c.ell, c.L, 0.0, detail="2 ell < L", **kw))
        rep.add(Row.leq("lemmaA.i", c.L, c.epsilon, tolerance, detail="L <= eps", **kw))
        scaled = c.L / c.ell * c.zeta_t2k
        rep.add(Row.leq("lemmaA.ii", K.cC, scaled, tolerance, detail="c(C) <= (L/ell) zeta^t", **kw))
        rep.add(Row.leq("lemmaA.ii", scaled, K.dC, tolerance, detail="(L/ell) zeta^t <= d(C)", **kw))
        exact_sq = 4 + 16 / c.cert.C ** 2 * c.cert.zeta ** (-2 * c.t2k)
        rep.add(Row.close("lemmaA.ii", (c.L / c.ell) ** 2, exact_sq, 1e-12, detail="shape formula", **kw))
    g = c.geometry
    union = g.union()
    rep.add(Row.leq("lemmaA.iii", k * c.Q_area / 2, union, tolerance, detail="union >= k|Q|/2", **kw))
    half = g.halfrect_union()
    rep.add(Row.close("lemmaA.iii", half.value, (k + 1) * c.Q_area / 2, tolerance, method=half.method,
                      detail="half-rect union = (k+1)|Q|/2", **kw))
    rep.add(Row.leq("disjointness", g.halfrect_pair_max, 1e-12 * c.Q_area, 0.0, method=half.method,
                    detail="max pairwise half-rect overlap", **kw))
    # the full intersection equals that of the two extreme angles
    full = g.full
    extremes = 1 | (1 << k)
    rep.add(Row.close("lemmaA.claim", g.intersection(full), g.intersection(extremes), 1e-12,
                      detail="chain intersection = extremes", **kw))
    lv = g.levels()
    for j in range(1, k + 1):
        rep.add(Row.leq("lemmaA.claim", lv.get(j + 1, 0), level_rhs(c, full, j), tolerance,
                        detail=f"|{{chi={j + 1}}}|", **kw))
    if exhaustive is None:
        exhaustive = False
    masks = default_masks(k + 1, random_subsets, seed, exhaustive)
    phis = _phis(c, phis)
    for phi in phis:
        name = getattr(phi, "name", repr(phi))
        for mask in masks:
            lhs = sum((phi(m) * v for m, v in sorted(g.levels(mask).items())), mpf(0))
            rhs = overlap_rhs(c, phi, mask)
            rep.add(Row.leq("lemmaA.iv", lhs, rhs, tolerance, seed=seed,
                            detail=f"phi={name} subset={mask:b}", **kw))
    rep.notes.append(f"overlap-bound coverage: {len(masks)} subsets "
                     f"({'exhaustive' if exhaustive else 'contiguous + seeded random'}), phis="
                     f"{[getattr(p, 'name', repr(p)) for p in phis]}")
    return rep


def verify_propB(c: Construction, phis: Sequence = (), *, random_subsets: int = 100, seed: int = 0,
                 tolerance: float = DEFAULT_TOL) -> Report:
    if c.k > MAX_K:
        raise geom.CapacityError(f"k={c.k} exceeds {MAX_K}")
    K, k, g = c.constants, c.k, c.geometry
    kw = dict(k=k, regime=c.cert.regime)
    rep = Report(f"propB k={k}")
    with mpmath.workprec(SEQ_PREC):
        lower = K.gamma * k / c.zeta_t2k * c.Theta_area
        rep.add(Row.leq("propB.i", lower, g.union(), tolerance, **kw))
        quarter = mpmath.pi / 4 * c.ell / c.L
        floor = K.gamma_prime * c.zeta_t2k
    for i in range(k + 1):
        r = g.disk_ratio(i)
        rep.add(Row.close("propB.ii", r, quarter, tolerance, detail=f"R_{i}: (pi/4) ell/L", **kw))
        rep.add(Row.leq("propB.ii", floor, r, tolerance, detail=f"R_{i}: >= gamma' zeta^t", **kw))
        rep.add(Row.close("propB.iii", g.rect_area(i), c.Q_area, 1e-12, detail=f"R_{i}", **kw))
    if phis:
        sub = verify_lemmaA(c, phis, random_subsets=random_subsets, seed=seed, tolerance=tolerance)
        rep.rows.extend(r for r in sub.rows if r.check == "lemmaA.iv")
        rep.notes.extend(sub.notes)
    return rep
