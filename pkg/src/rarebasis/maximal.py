"""Maximal-operator quantities on constructed families.

Lower bounds for ``M f`` on ``Y_k``, blowup rates against an Orlicz target,
the four hypotheses of the differentiation lemma with explicit constants,
Kakeya-type stretch ratios and a raster probe for weak type (1,1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np
from mpmath import mpf
from scipy import ndimage

from . import geom, orlicz
from .angles import SEQ_PREC
from .construct import Construction, TruncatedFamily, default_masks
from .report import Report, Row

DEFAULT_T = 2
DIVERGENCE_THRESHOLD = 10
DIVERGENCE_BY_K = 10  # the threshold is only asserted once the series reaches this k
STABILITY_BAND = 2.0
STABILITY_K_MIN = 3


def f_k(c: Construction) -> orlicz.SimpleFunction:
    """``(1/gamma') zeta^{-t(2k)} chi_{Theta_k}``."""
    with mpmath.workprec(SEQ_PREC):
        coef = 1 / (c.constants.gamma_prime * c.zeta_t2k)
    return orlicz.SimpleFunction(((coef, c.Theta),))


def maximal_lower_on_Y(c: Construction, f: orlicz.SimpleFunction):
    """Certified lower bound for ``M f`` on all of ``Y_k``: ``coef * min_R |R cap Theta_k| / |R|``."""
    if not f.terms:
        return mpf(0)
    if len(f.terms) != 1:
        raise ValueError("only f = const * chi_{Theta_k} is supported")
    coef, region = f.terms[0]
    th = c.Theta
    if not (isinstance(region, geom.Disk) and region.radius == th.radius
            and region.center.x == th.center.x and region.center.y == th.center.y):
        raise ValueError("only f = const * chi_{Theta_k} is supported")
    g = c.geometry
    with mpmath.workprec(g.prec):
        return coef * min(g.disk_ratio(i) for i in range(c.k + 1))


# --- blowup -------------------------------------------------------------------------


def target_beta(regime: str, d: float = 1) -> float | None:
    """Exponent ``beta`` of the ``Phi_beta`` target, ``None`` for the loglog target."""
    if regime == "lacunary":
        return 1.0
    if regime == "power":
        return 1 / d
    if regime == "superlacunary":
        return None
    raise ValueError(regime)


def growth_M(cert, kmax: int = 20) -> tuple:
    """``(M, source)`` for the growth rate of ``t_k`` the blowup constant uses.

    ``t_k**beta / k`` for power-type targets, ``log t_k / k`` for loglog.
    """
    if cert.t_form == "k":
        return 1.0, "closed form: t_k = k"
    if cert.t_form == "(k+j0)^d":
        return 1.0, "closed form: lim sup (k+j0)/k = 1"
    if cert.t_form == "d^k":
        return math.log(cert.d), "closed form: log(d^k)/k = log d"
    beta = cert.beta or 1.0
    vals = [float(cert.t(k)) ** beta / k for k in range(1, kmax + 1)]
    return max(vals), f"max over k <= {kmax}"


def gamma1(c: Construction) -> mpf:
    """Blowup constant: ``(log 1/zeta)^-beta gamma' gamma / (2^{beta+1} M~)``.

    For the loglog target the analogue ``gamma gamma' / (4 M~ log 1/zeta)``
    with ``M = lim sup log t_k / k`` is used.
    """
    K = c.constants
    beta = target_beta(c.cert.regime, c.cert.d)
    M, _ = growth_M(c.cert)
    Mt = max(1.0, M)
    with mpmath.workprec(SEQ_PREC):
        lz = mpmath.log(1 / c.cert.zeta)
        if beta is None:
            return K.gamma * K.gamma_prime / (4 * Mt * lz)
        return lz ** (-beta) * K.gamma_prime * K.gamma / (2 ** (beta + 1) * Mt)


@dataclass
class BlowupReport:
    k: int
    superlevel_area: mpf  # |Y_k|, a certified subset of {M f_k >= 1}
    phi_integral: mpf
    ratio: mpf
    gamma1: mpf
    maximal_lower: mpf
    divergence: dict = field(default_factory=dict)  # psi name -> int Phi(f_k) / int psi(T f_k)

    @property
    def passed(self) -> bool:
        return self.ratio >= self.gamma1


def _scaled_integral(phi, f: orlicz.SimpleFunction, T) -> mpf:
    return orlicz.integral(phi, orlicz.SimpleFunction(tuple((T * c, r) for c, r in f.terms)))


def blowup_series(constructions: Sequence[Construction], phi=None, psis: Sequence = (),
                  T=DEFAULT_T) -> list:
    """Per-``k`` blowup data for one certified regime."""
    out = []
    for c in constructions:
        target = phi or orlicz.regime_target(c.cert.regime, c.cert.d)
        f = f_k(c)
        with mpmath.workprec(SEQ_PREC):
            integ = orlicz.integral(target, f)
            Y = c.Y_k_area
            div = {getattr(p, "name", repr(p)): integ / _scaled_integral(p, f, T) for p in psis}
            out.append(BlowupReport(c.k, Y, integ, Y / integ, gamma1(c), maximal_lower_on_Y(c, f), div))
    return out


def blowup_report(series: Sequence[BlowupReport], regime: str, tolerance: float = 1e-9,
                  threshold: float = DIVERGENCE_THRESHOLD, controls: Sequence[str] = (),
                  by_k: int = DIVERGENCE_BY_K) -> Report:
    """Rows for the blowup claims.

    Divergence series must increase strictly and, once ``k >= by_k``, lie above
    ``threshold``; series named in ``controls`` (the target against itself)
    must stay below it.
    """
    rep = Report(f"blowup {regime}")
    for b in series:
        kw = dict(k=b.k, regime=regime)
        rep.add(Row.leq("remark.ii'", 1, b.maximal_lower, tolerance, detail="M f_k >= 1 on Y_k", **kw))
        with mpmath.workprec(SEQ_PREC):
            rep.add(Row.leq("propC.claim1", b.gamma1 * b.phi_integral, b.superlevel_area, tolerance,
                            detail="gamma1 int Phi(f_k) <= |Y_k|", **kw))
    names = sorted({n for b in series for n in b.divergence})
    for name in names:
        vals = [(b.k, b.divergence[name]) for b in series if name in b.divergence]
        if not vals:
            continue
        if name in controls:
            k1 = vals[-1][0]
            top = max(v for _, v in vals)
            rep.add(Row.leq("propC.claim2", top, threshold, 0.0, detail=f"control psi={name} stays bounded",
                            k=k1, regime=regime))
            continue
        for (k0, v0), (k1, v1) in zip(vals, vals[1:]):
            rep.add(Row.lt("propC.claim2", v0, v1, detail=f"psi={name} increasing {k0}->{k1}",
                           k=k1, regime=regime))
        k1, v1 = vals[-1]
        if k1 >= by_k:
            rep.add(Row.leq("propC.claim2", threshold, v1, 0.0, detail=f"psi={name} exceeds {threshold}",
                            k=k1, regime=regime))
        else:
            rep.notes.append(f"psi={name}: threshold {threshold} not asserted below k={by_k} (last k={k1})")
    return rep


# --- differentiation lemma hypotheses -----------------------------------------------


@dataclass
class StokolosInput:
    constructions: list  # families R_k, one Construction per k
    target: orlicz.OrliczFunction  # Phi
    psi: object  # complementary function of Phi
    random_subsets: int = 100
    seed: int = 0

    @property
    def lambdas(self) -> list:
        """``lambda_k = zeta^{-t(2k)}``."""
        return [1 / c.zeta_t2k for c in self.constructions]

    @property
    def balls(self) -> list:
        return [c.Theta for c in self.constructions]

    def validate(self) -> None:
        lam = self.lambdas
        if any(not b > a for a, b in zip(lam, lam[1:])):
            raise ValueError("lambda_k must be strictly increasing")


def stokolos_constants(c: Construction, inp: StokolosInput) -> dict:
    """Smallest feasible ``c1`` and ``c2`` and largest feasible ``c3`` for one ``k``."""
    g = c.geometry
    masks = default_masks(c.k + 1, inp.random_subsets, inp.seed)
    with mpmath.workprec(g.prec):
        c1 = mpf(0)
        for mask in masks:
            integ = orlicz.level_integral(inp.psi, g.levels(mask))
            size = bin(mask).count("1") * c.Q_area
            c1 = max(c1, integ / size)
        lam = 1 / c.zeta_t2k
        c2 = lam * min(g.disk_ratio(i) for i in range(c.k + 1))
        c3 = g.union() / (inp.target(lam) * c.Theta_area)
    return {"c1": c1, "c2": c2, "c3": c3, "subsets": len(masks)}


def stokolos_check(inp: StokolosInput, band: float = STABILITY_BAND, tolerance: float = 1e-12,
                   k_min: int = STABILITY_K_MIN) -> Report:
    """Hypotheses (i)-(iv) with ``E_k = B_k = Theta_k`` and ``lambda_k = zeta^{-t(2k)}``.

    Per-``k`` constants are reported raw for every construction.  Over
    ``k >= k_min``, ``c2`` and ``c3`` must stay within a ``band``-fold range and
    ``c1`` must not grow past ``band`` times its first value (it may decay,
    which only improves the bound).
    """
    inp.validate()
    regime = inp.constructions[0].cert.regime if inp.constructions else ""
    rep = Report(f"stokolos {regime}")
    per_k = {}
    for c in inp.constructions:
        kw = dict(k=c.k, regime=regime)
        g = c.geometry
        areas = [g.rect_area(i) for i in range(c.k + 1)]
        with mpmath.workprec(g.prec):
            dev = max(abs(a - c.Q_area) for a in areas) / c.Q_area
        rep.add(Row.leq("stok.i", dev, tolerance, 0.0, detail="max relative area deviation", **kw))
        cs = stokolos_constants(c, inp)
        per_k[c.k] = cs
        for name, check in (("c1", "stok.ii"), ("c2", "stok.iii"), ("c3", "stok.iv")):
            v = cs[name]
            ok = bool(v > 0 and mpmath.isfinite(v)) if name != "c1" else bool(v >= 0 and mpmath.isfinite(v))
            rep.add(Row.flag(check, v, ok, detail=f"{name} finite" + (" positive" if name != "c1" else ""), **kw))
        rep.add(Row.leq("stok.iii", c.constants.gamma_prime, cs["c2"], 1e-9, detail="c2 >= gamma'", **kw))
    ks = [k for k in sorted(per_k) if k >= k_min]
    if ks:
        first = per_k[ks[0]]["c1"]
        for k in ks:
            rep.add(Row.leq("stok.ii", per_k[k]["c1"], band * first, 0.0,
                            detail=f"c1(k) <= {band:g} c1(k={ks[0]})", k=k, regime=regime))
        for name, check in (("c2", "stok.iii"), ("c3", "stok.iv")):
            vals = [per_k[k][name] for k in ks]
            rep.add(Row.leq(check, max(vals) / min(vals), band, 0.0,
                            detail=f"{name} max/min over k={ks[0]}..{ks[-1]}", regime=regime))
    # uniform (k-independent) constants over every tested k
    uniform = {"c1": max((v["c1"] for v in per_k.values()), default=None),
               "c2": min((v["c2"] for v in per_k.values()), default=None),
               "c3": min((v["c3"] for v in per_k.values()), default=None)}
    rep.data.update({"per_k": per_k, "uniform": uniform})
    rep.notes.append("E_k is taken equal to B_k = Theta_k; (iii) uses lambda_k in place of lambda_n")
    return rep


# --- regime bound constants --------------------------------------------------------


def measured_bound_constant(c: Construction, psi) -> mpf:
    """``int psi(sum chi_R) / |Q_k|`` over the full family (the largest over sub-families)."""
    g = c.geometry
    with mpmath.workprec(g.prec):
        return orlicz.level_integral(psi, g.levels()) / c.Q_area


def psi_growth_constant(regime: str, psi, d: float = 1) -> float:
    """Smallest ``K`` with ``psi <= K * growth`` on a grid, growth per regime."""
    if regime == "lacunary":
        return orlicz.smallest_exp_constant(psi, 30.0)
    if regime == "superlacunary":
        return orlicz.smallest_growth_constant(psi, lambda s: math.exp(math.exp(s)), 6.0, 601)
    return orlicz.smallest_exp_constant(psi, 30.0, 3001, d)


def analytic_factor(c: Construction) -> mpf:
    """The regime's explicit ``k``-dependent factor in the bound for ``int psi(sum chi)``."""
    cert, k = c.cert, c.k
    with mpmath.workprec(SEQ_PREC):
        z = cert.zeta
        if cert.regime == "lacunary":
            e = mpmath.e
            return (e * z) ** k * e / ((e - 1) * (1 - z))
        if cert.regime == "superlacunary":
            d = int(cert.d)
            return mpmath.exp(mpmath.e ** (k + 1) + mpf(d) ** k - mpf(d) ** (2 * k))
        return mpf(k + 1) ** 2 * cert.eta ** (mpf(k) ** mpf(cert.d))


def regime_bound_series(constructions: Sequence[Construction], psi=None) -> Report:
    """Measured bound constants against the regime's closed-form bound."""
    if not constructions:
        return Report("regime bound")
    cert = constructions[0].cert
    regime = cert.regime
    psi = psi or orlicz.regime_conjugate(regime, cert.d)
    K = psi_growth_constant(regime, psi, cert.d)
    eC = constructions[0].constants.eC
    rep = Report(f"regime bound {regime}")
    series = []
    for c in constructions:
        meas = measured_bound_constant(c, psi)
        fac = analytic_factor(c)
        series.append((c.k, meas, fac))
        kw = dict(k=c.k, regime=regime)
        if regime == "lacunary":
            with mpmath.workprec(SEQ_PREC):
                bound = 2 * math.e * K * eC / (1 - cert.zeta)
            rep.add(Row.leq("lacunary.bound", meas, bound, 1e-9, detail="measured <= 2K1'/(1-zeta)", **kw))
    rep.data.update({"series": series, "K": K})
    for (k0, m0, _), (k1, m1, _) in zip(series, series[1:]):
        check = "lacunary.bound" if regime == "lacunary" else f"{regime}.factor"
        if regime == "lacunary":
            rep.add(Row.leq(check, m1, m0, 1e-12, detail=f"non-increasing {k0}->{k1}", k=k1, regime=regime))
        else:
            rep.add(Row.lt(check, m1, m0, detail=f"decreasing {k0}->{k1}", k=k1, regime=regime))
    if regime != "lacunary" and len(series) > 1:
        rep.add(Row.lt(f"{regime}.factor", series[-1][1], series[0][1] / 2,
                        detail=f"final < 0.5 x initial (k={series[0][0]}..{series[-1][0]})", regime=regime))
    rep.notes.append(f"growth constant K = {K:.6g} on a grid; analytic factors are informational")
    return rep


# --- Kakeya ratio ------------------------------------------------------------------


@dataclass
class KakeyaResult:
    ratio: object  # |U R*| / |U R|
    maximal_check: object  # min over R of |R cap R*| / |R*|
    union: object
    stretched_union: object
    method: str
    excess: object = None  # ratio - factor, at full working precision


def _is_square(r: geom.RotatedRect) -> bool:
    return r.L == r.ell


def kakeya_ratio(rects: Sequence[geom.RotatedRect], factor=3) -> KakeyaResult:
    """``|U R*| / |U R|`` where ``R*`` has ``factor`` times the length about the same centre."""
    if not rects:
        raise ValueError("empty family")
    if any(_is_square(r) for r in rects):
        raise geom.InvalidFamilyError("square rectangles have no long side to stretch")
    if len(rects) > geom.MAX_EXACT_POLYGONS:
        raise geom.CapacityError(f"{len(rects)} rectangles exceeds exact capacity")
    check = _maximal_check(rects, factor)
    same_shape = all(r.L == rects[0].L and r.ell == rects[0].ell for r in rects)
    if all(r.offset is None for r in rects) and same_shape:
        with mpmath.workprec(SEQ_PREC):
            ms = sorted({mpmath.tan(mpf(r.theta)) for r in rects}, reverse=True)
        if len(ms) == len(rects):
            L, ell = rects[0].L, rects[0].ell
            A = TruncatedFamily(ms, 0, L, ell)
            B = TruncatedFamily(ms, L * (1 - factor) / 2, L * (1 + factor) / 2, ell)
            a, b = A.union(), B.union()
            with mpmath.workprec(max(A.prec, B.prec)):
                # |R*| = factor |R| cancels the singleton terms; b - factor*a alone loses it
                diff = mpf(0)
                for mask in range(1, 1 << len(ms)):
                    pc = bin(mask).count("1")
                    if pc > 1:
                        diff += (-1) ** (pc + 1) * (B.intersection(mask) - factor * A.intersection(mask))
                return KakeyaResult(b / a, check, a, b, "exact", diff / a)
    polys = [geom.to_polygon(r) for r in rects]
    stretched = [geom.stretched_polygon(r, factor) for r in rects]
    a = geom.union_area(polys).value
    b = geom.union_area(stretched).value
    return KakeyaResult(b / a, check, a, b, "exact", (b - factor * a) / a)


def _maximal_check(rects, factor):
    """``|R cap R*| / |R*|``, which equals ``1/factor`` once ``R`` is inside ``R*``.

    ``R*`` shares the centre, direction and width of ``R``, so containment is
    the interval inclusion ``[0, L]`` in ``[L(1-f)/2, L(1+f)/2]``, i.e. ``f >= 1``.
    Clipping thin rectangles in floating point is not reliable enough to decide it.
    """
    if not factor >= 1:
        raise geom.InvalidFamilyError("rectangle not contained in its stretch")
    out = None
    for r in rects:
        try:
            v = Fraction(r.L) * Fraction(r.ell) / (Fraction(factor) * Fraction(r.L) * Fraction(r.ell))
        except TypeError:
            v = 1 / mpmath.mpf(factor)
        out = v if out is None else min(out, v)
    return out


def construction_kakeya(c: Construction, factor=3) -> KakeyaResult:
    return kakeya_ratio(c.rects(), factor)


# --- weak (1,1) raster probe -------------------------------------------------------


def _box_sums(f: np.ndarray, h: int, w: int) -> np.ndarray:
    """Sums of ``f`` over ``h x w`` boxes, indexed by lower-left corner, corners from ``-h+1``/``-w+1``."""
    n0, n1 = f.shape
    pad = np.zeros((n0 + 2 * h, n1 + 2 * w))
    pad[h:h + n0, w:w + n1] = f
    sat = np.zeros((pad.shape[0] + 1, pad.shape[1] + 1))
    sat[1:, 1:] = pad.cumsum(0).cumsum(1)
    # corner index i in [0, n0 + h - 1) maps to pad row i + 1 (domain row i - h + 1)
    i0 = np.arange(1, n0 + h)
    j0 = np.arange(1, n1 + w)
    return (sat[np.ix_(i0 + h, j0 + w)] - sat[np.ix_(i0, j0 + w)]
            - sat[np.ix_(i0 + h, j0)] + sat[np.ix_(i0, j0)])


def box_maximal(f: np.ndarray, shapes: Sequence[tuple]) -> np.ndarray:
    """Raster ``M f``: max over translates of each ``(h, w)`` pixel box containing the pixel."""
    out = np.zeros_like(f, dtype=float)
    n0, n1 = f.shape
    for h, w in shapes:
        avg = _box_sums(f, h, w) / (h * w)
        # pixel x lies in boxes with corners x-h+1..x, i.e. avg rows x..x+h-1
        m = ndimage.maximum_filter(avg, size=(h, w), origin=(-(h // 2), -(w // 2)), mode="constant", cval=0.0)
        # maximum_filter with this origin takes rows i..i+h-1 at output row i
        out = np.maximum(out, m[:n0, :n1])
    return out


def dyadic_shapes(kmax: int, aspect: float = 4.0) -> list:
    """Nested standard intervals ``[0, 2^-k] x [0, 2^-k / aspect]``, k = 1..kmax."""
    return [(2.0 ** -k, 2.0 ** -k / aspect) for k in range(1, kmax + 1)]


def weak11_ratio(f: np.ndarray, alpha: float, pixel_shapes: Sequence[tuple]) -> float:
    """``alpha |{M f > alpha}| / ||f||_1`` on the raster, boxes given in pixels."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    l1 = float(f.sum())
    if l1 <= 0:
        return 0.0
    mf = box_maximal(f, pixel_shapes)
    return float((mf > alpha).sum()) * alpha / l1


@dataclass
class Weak11Probe:
    constant: float
    history: list
    unbounded_trend: bool
    grid: int
    trials: int
    seed: int


def weak11_probe(shapes: Sequence[tuple], trials: int = 100, seed: int = 0, grid: int = 2048) -> Weak11Probe:
    """Empirical ``sup alpha |{M f > alpha}| / ||f||_1`` over random simple functions.

    ``shapes`` are ``(L, ell)`` side lengths in units of the unit square; each is
    rounded to at least one pixel.  Diagnostic only.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    rng = np.random.default_rng(seed)
    px = 1.0 / grid
    pix = sorted({(max(1, round(ell / px)), max(1, round(L / px))) for L, ell in shapes})
    best, hist = 0.0, []
    for _ in range(trials):
        f = np.zeros((grid, grid))
        for _ in range(rng.integers(1, 5)):
            s = int(rng.integers(1, max(2, grid // 8)))
            i, j = rng.integers(0, grid - s, size=2)
            f[i:i + s, j:j + s] += rng.uniform(0.1, 1.0)
        alpha = float(rng.uniform(0.05, 1.2)) * float(f.max())
        val = weak11_ratio(f, alpha, pix)
        best = max(best, val)
        hist.append(best)
    half = hist[len(hist) // 2]
    return Weak11Probe(best, hist, bool(half > 0 and hist[-1] > 2 * half), grid, trials, seed)
