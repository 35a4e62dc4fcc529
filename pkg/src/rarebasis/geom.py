"""Planar measure kernel: convex polygons, origin-anchored rotated rectangles, disks.

Every routine is written against plain arithmetic so it accepts Python floats
or :class:`mpmath.mpf` coordinates.  The high-precision path is what makes the
very thin rectangles of the construction tractable; callers pick the working
precision with ``mpmath.workprec``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import Callable, NamedTuple, Sequence

import mpmath
import numpy as np

MAX_EXACT_POLYGONS = 24


class CapacityError(ValueError):
    """Raised when an exact subset walk would exceed the supported size."""


class InvalidFamilyError(ValueError):
    pass


class Point(NamedTuple):
    x: object
    y: object


class Measure(NamedTuple):
    value: object
    stderr: float
    method: str


def _lib(*xs):
    for x in xs:
        if isinstance(x, mpmath.mpf):
            return mpmath
    return math


def _eps(x) -> object:
    """Relative size below which a clipped area is treated as degenerate."""
    if isinstance(x, mpmath.mpf):
        return mpmath.ldexp(1, -(mpmath.mp.prec - 30))
    return 1e-14


def _shoelace(vs: Sequence[Point]):
    x0, y0 = vs[0]
    s = 0
    for i in range(1, len(vs) - 1):
        ax, ay = vs[i].x - x0, vs[i].y - y0
        bx, by = vs[i + 1].x - x0, vs[i + 1].y - y0
        s += ax * by - ay * bx
    return s / 2


class ConvexPolygon:
    """Counterclockwise convex polygon."""

    __slots__ = ("vertices",)

    def __init__(self, vertices: Sequence, *, check: bool = True):
        vs = tuple(Point(*v) for v in vertices)
        if check:
            if len(vs) < 3:
                raise ValueError("a polygon needs at least 3 vertices")
            a = _shoelace(vs)
            if not a > 0:
                raise ValueError("vertices must be counterclockwise with positive area")
            scale = max(abs(v.x) + abs(v.y) for v in vs) ** 2
            tol = -1e-9 * scale
            n = len(vs)
            for i in range(n):
                p, q, r = vs[i], vs[(i + 1) % n], vs[(i + 2) % n]
                cr = (q.x - p.x) * (r.y - q.y) - (q.y - p.y) * (r.x - q.x)
                if cr < tol:
                    raise ValueError("polygon is not convex")
        self.vertices = vs

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __repr__(self):
        return f"ConvexPolygon({[(float(p.x), float(p.y)) for p in self.vertices]})"

    def edges(self):
        vs = self.vertices
        return zip(vs, vs[1:] + vs[:1])

    def contains(self, x, y, tol: float = 0.0):
        """Vectorised point membership for float arrays."""
        inside = np.ones(np.shape(x), dtype=bool)
        for a, b in self.edges():
            ax, ay, bx, by = float(a.x), float(a.y), float(b.x), float(b.y)
            inside &= (bx - ax) * (y - ay) - (by - ay) * (x - ax) >= -tol
        return inside


@dataclass(frozen=True)
class RotatedRect:
    """``r_theta([0, L] x [0, ell])``: rectangle rotated about its lower-left vertex.

    That vertex sits at the origin unless ``offset`` moves it.
    """

    L: object
    ell: object
    theta: object
    offset: Point | None = None

    def __post_init__(self):
        if not (self.L > 0 and self.ell > 0):
            raise ValueError("rectangle sides must be positive")
        if not (0 <= self.theta < math.pi / 2):
            raise ValueError("theta must lie in [0, pi/2)")

    @property
    def area(self):
        return self.L * self.ell


@dataclass(frozen=True)
class HalfRect:
    """Right half ``r_theta([L/2, L] x [0, ell])`` of a :class:`RotatedRect`."""

    parent: RotatedRect


@dataclass(frozen=True)
class Disk:
    center: Point
    radius: object

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def area(self):
        return _lib(self.radius).pi * self.radius ** 2


def rect_polygon(theta, x0, x1, y0, y1) -> ConvexPolygon:
    """Image of the interval ``[x0, x1] x [y0, y1]`` under the rotation by ``theta``."""
    lib = _lib(theta, x0, x1, y0, y1)
    c, s = lib.cos(theta), lib.sin(theta)
    corners = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    return ConvexPolygon([Point(x * c - y * s, x * s + y * c) for x, y in corners], check=False)


def translate(p: ConvexPolygon, offset: Point | None) -> ConvexPolygon:
    if offset is None:
        return p
    return ConvexPolygon([Point(v.x + offset.x, v.y + offset.y) for v in p], check=False)


def to_polygon(r: RotatedRect | HalfRect) -> ConvexPolygon:
    if isinstance(r, HalfRect):
        p = r.parent
        return translate(rect_polygon(p.theta, p.L / 2, p.L, 0 * p.L, p.ell), p.offset)
    zero = 0 * r.L
    return translate(rect_polygon(r.theta, zero, r.L, zero, r.ell), r.offset)


def stretched_polygon(r: RotatedRect, factor=3) -> ConvexPolygon:
    """``R*``: same centre and width as ``r``, ``factor`` times the length."""
    zero = 0 * r.L
    lo = r.L * (1 - factor) / 2
    return translate(rect_polygon(r.theta, lo, lo + factor * r.L, zero, r.ell), r.offset)


def area(p: ConvexPolygon | None):
    """Shoelace area; ``None`` (the empty intersection) has area 0."""
    if p is None:
        return 0.0
    return abs(_shoelace(p.vertices))


def _clip_halfplane(vs: list, a: Point, b: Point) -> list:
    ex, ey = b.x - a.x, b.y - a.y
    vals = [ex * (p.y - a.y) - ey * (p.x - a.x) for p in vs]
    out = []
    n = len(vs)
    for i in range(n):
        p, fp = vs[i], vals[i]
        j = i + 1 if i + 1 < n else 0
        q, fq = vs[j], vals[j]
        if fp >= 0:
            out.append(p)
        if (fp > 0 > fq) or (fp < 0 < fq):
            t = fp / (fp - fq)
            out.append(Point(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)))
    return out


def intersect_convex(a: ConvexPolygon | None, b: ConvexPolygon | None) -> ConvexPolygon | None:
    """Clip ``a`` successively by the half-planes of ``b``.

    Returns ``None`` when the intersection is empty or has degenerate area.
    """
    if a is None or b is None:
        return None
    vs = list(a.vertices)
    for p, q in b.edges():
        vs = _clip_halfplane(vs, p, q)
        if len(vs) < 3:
            return None
    dedup = [v for i, v in enumerate(vs) if v != vs[i - 1]]
    if len(dedup) < 3:
        return None
    out = ConvexPolygon(dedup, check=False)
    scale = min(area(a), area(b))
    if area(out) <= _eps(scale) * scale:
        return None
    return out


def chain_intersection_area(rects: Sequence[RotatedRect]):
    """Area of the intersection of same-shape rectangles with decreasing angles in [0, pi/4]."""
    if len(rects) < 2:
        raise InvalidFamilyError("need at least two rectangles")
    L, ell = rects[0].L, rects[0].ell
    if any(r.L != L or r.ell != ell for r in rects):
        raise InvalidFamilyError("rectangles must share (L, ell)")
    thetas = [r.theta for r in rects]
    if any(not t1 > t2 for t1, t2 in zip(thetas, thetas[1:])):
        raise InvalidFamilyError("angles must be strictly decreasing")
    if not (0 <= thetas[-1] and thetas[0] <= math.pi / 4):
        raise InvalidFamilyError("angles must lie in [0, pi/4]")
    acc = to_polygon(rects[0])
    for r in rects[1:]:
        acc = intersect_convex(acc, to_polygon(r))
    return area(acc)


def intersection_table(polys: Sequence[ConvexPolygon]) -> list:
    """Areas of ``cap S`` for every subset bitmask ``S`` (index 0 unused).

    Each subset is clipped once from the subset without its highest member.
    """
    n = len(polys)
    if n > MAX_EXACT_POLYGONS:
        raise CapacityError(f"{n} polygons exceeds exact capacity {MAX_EXACT_POLYGONS}")
    inter: list = [None] * (1 << n)
    areas: list = [0] * (1 << n)
    for mask in range(1, 1 << n):
        top = mask.bit_length() - 1
        rest = mask ^ (1 << top)
        if rest == 0:
            inter[mask] = polys[top]
        else:
            prev = inter[rest]
            inter[mask] = None if prev is None else intersect_convex(prev, polys[top])
        areas[mask] = area(inter[mask])
    return areas


def _submasks(mask: int):
    sub = mask
    while sub:
        yield sub
        sub = (sub - 1) & mask
    # order fixed by rank; callers sort when summing


def depth_measures(areas: Sequence, members: int) -> dict:
    """``{m: |{chi >= m}|}`` for the sub-family selected by ``members``.

    Uses ``|{chi >= m}| = sum_{|T| >= m} (-1)^{|T|-m} C(|T|-1, m-1) |cap T|``.
    """
    size = bin(members).count("1")
    ge = {m: 0 for m in range(1, size + 1)}
    for t in sorted(_submasks(members)):
        a = areas[t]
        if not a:
            continue
        c = bin(t).count("1")
        for m in range(1, c + 1):
            term = comb(c - 1, m - 1) * a
            ge[m] = ge[m] + term if (c - m) % 2 == 0 else ge[m] - term
    return ge


def exact_levels(ge: dict) -> dict:
    """Convert ``|{chi >= m}|`` into ``|{chi = m}|``."""
    top = max(ge, default=0)
    return {m: ge[m] - (ge[m + 1] if m < top else 0) for m in ge}


def union_area(polys: Sequence[ConvexPolygon], method: str = "inclusion_exclusion",
               samples: int = 10**6, seed: int = 0) -> Measure:
    if method == "inclusion_exclusion":
        if not polys:
            return Measure(0.0, 0.0, "exact")
        areas = intersection_table(polys)
        return Measure(depth_measures(areas, (1 << len(polys)) - 1)[1], 0.0, "exact")
    if method == "monte_carlo":
        return mc_union_depth(polys, samples, seed)[0]
    raise ValueError(f"unknown method {method!r}")


def levelset_measure(polys: Sequence[ConvexPolygon], m: int):
    """``|{x : sum_i chi_{P_i}(x) >= m}|``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(polys) > MAX_EXACT_POLYGONS:
        raise CapacityError(f"{len(polys)} polygons exceeds exact capacity {MAX_EXACT_POLYGONS}")
    if m > len(polys):
        return 0.0
    areas = intersection_table(polys)
    return depth_measures(areas, (1 << len(polys)) - 1)[m]


def _segment_disk_area(px, py, qx, qy, r, lib):
    """Signed area of (center, p, q) triangle intersected with the disk, center at origin."""
    dx, dy = qx - px, qy - py
    a = dx * dx + dy * dy
    if a == 0:
        return 0 * r
    b = px * dx + py * dy
    c = px * px + py * py - r * r
    disc = b * b - a * c
    cuts = [0 * a]
    if disc > 0:
        sq = lib.sqrt(disc)
        for t in ((-b - sq) / a, (-b + sq) / a):
            if 0 < t < 1:
                cuts.append(t)
    cuts.append(1 + 0 * a)
    total = 0 * r
    for t0, t1 in zip(cuts, cuts[1:]):
        x0, y0 = px + t0 * dx, py + t0 * dy
        x1, y1 = px + t1 * dx, py + t1 * dy
        tm = (t0 + t1) / 2
        mx, my = px + tm * dx, py + tm * dy
        cross = x0 * y1 - y0 * x1
        if mx * mx + my * my <= r * r:
            total += cross / 2
        else:
            total += r * r * lib.atan2(cross, x0 * x1 + y0 * y1) / 2
    return total


def disk_polygon_area(d: Disk, p: ConvexPolygon):
    """Area of ``d`` intersected with ``p`` by Green's theorem over the polygon boundary."""
    cx, cy = d.center
    lib = _lib(cx, cy, d.radius, *(c for v in p for c in v))
    total = 0
    for a, b in p.edges():
        total += _segment_disk_area(a.x - cx, a.y - cy, b.x - cx, b.y - cy, d.radius, lib)
    return abs(total)


def mc_measure(indicator: Callable, bbox: tuple, samples: int, seed: int) -> Measure:
    """Uniform Monte-Carlo estimate of the measure of ``{indicator}`` inside ``bbox``.

    ``indicator`` takes float arrays ``(x, y)`` and returns a boolean array.
    ``bbox`` is ``(xmin, ymin, xmax, ymax)``.
    """
    if samples < 10**4:
        raise ValueError("at least 1e4 samples are required")
    xmin, ymin, xmax, ymax = map(float, bbox)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("degenerate bounding box")
    rng = np.random.default_rng(seed)
    x = rng.uniform(xmin, xmax, samples)
    y = rng.uniform(ymin, ymax, samples)
    hits = np.asarray(indicator(x, y), dtype=bool)
    box = (xmax - xmin) * (ymax - ymin)
    p = hits.mean()
    return Measure(box * p, box * math.sqrt(p * (1 - p) / samples), "monte-carlo")


def _sample_in_polygon(p: ConvexPolygon, n: int, rng):
    vs = np.array([[float(v.x), float(v.y)] for v in p])
    tri = [(vs[0], vs[i], vs[i + 1]) for i in range(1, len(vs) - 1)]
    w = np.array([abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) for a, b, c in tri])
    idx = rng.choice(len(tri), size=n, p=w / w.sum())
    u, v = rng.random(n), rng.random(n)
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    a = np.array([t[0] for t in tri])[idx]
    b = np.array([t[1] for t in tri])[idx]
    c = np.array([t[2] for t in tri])[idx]
    pts = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    return pts[:, 0], pts[:, 1]


def _weighted_estimates(total_area: float, depth: np.ndarray, n_members: int):
    """Union and depth-histogram estimates from points sampled over the disjoint sum of the family."""
    n = len(depth)
    w = total_area / depth
    union = Measure(float(w.mean()), float(w.std(ddof=1) / math.sqrt(n)), "monte-carlo")
    levels = {}
    for m in range(1, n_members + 1):
        g = np.where(depth == m, w, 0.0)
        levels[m] = Measure(float(g.mean()), float(g.std(ddof=1) / math.sqrt(n)), "monte-carlo")
    return union, levels


def mc_union_depth(polys: Sequence[ConvexPolygon], samples: int, seed: int):
    """Importance-sampled union area and ``|{chi = m}|`` histogram for a polygon family.

    Points are drawn from the disjoint sum of the members (member chosen with
    probability proportional to area); a point of depth ``c`` gets weight ``1/c``.
    """
    rng = np.random.default_rng(seed)
    areas = np.array([float(area(p)) for p in polys])
    total = areas.sum()
    counts = rng.multinomial(samples, areas / total)
    xs, ys = [], []
    for p, c in zip(polys, counts):
        if c:
            x, y = _sample_in_polygon(p, int(c), rng)
            xs.append(x)
            ys.append(y)
    x, y = np.concatenate(xs), np.concatenate(ys)
    scale = max(abs(float(c)) for p in polys for v in p for c in v)
    depth = np.zeros(len(x))
    for p in polys:
        depth += p.contains(x, y, tol=1e-13 * scale * scale)
    depth = np.maximum(depth, 1)
    return _weighted_estimates(total, depth, len(polys))


def mc_rect_family(tangents: Sequence, aspect, samples: int, seed: int, near=None):
    """Monte-Carlo oracle for ``{r_theta Q}`` with ``Q = [0, L] x [0, ell]`` in units of ``|Q|``.

    Works in each rectangle's own frame with coordinates kept as logarithms, so
    it stays meaningful when ``L / ell`` or the angle gaps are far outside float
    range.  ``tangents`` are ``tan(theta_i)``; ``aspect`` is ``L / ell``.

    Sampling is stratified along each rectangle: half the points fall in the
    first fraction ``near`` of the length (default ``8 / (aspect * min gap)``,
    where all overlaps live) and half in the rest.  Returns ``(union, levels)``
    normalised by ``|Q|``.
    """
    n = len(tangents)
    if samples < 2 * n:
        raise ValueError("too few samples")
    rng = np.random.default_rng(seed)
    with mpmath.workprec(256):
        ms = [mpmath.mpf(m) for m in tangents]
        aspect = mpmath.mpf(aspect)
        log_aspect = float(mpmath.log(aspect))
        rel = {}
        gap = mpmath.mpf(1)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                # angle of frame i seen from frame j
                num = ms[i] - ms[j]
                den = 1 + ms[i] * ms[j]
                hyp = mpmath.sqrt(num * num + den * den)
                sn, c = num / hyp, den / hyp
                gap = min(gap, abs(sn))
                rel[i, j] = (float(mpmath.sign(sn)), float(mpmath.log(abs(sn))) if sn else -math.inf, float(c))
        if near is None:
            near = min(mpmath.mpf(1), 8 / (aspect * gap))
        log_near = float(mpmath.log(near))
        near_f = float(near)
    strata = [(log_near, None)] if near_f >= 1 else [(log_near, None), (log_near, near_f)]
    per = samples // len(strata)
    union_mean, union_var = 0.0, 0.0
    lv_mean = np.zeros(n)
    lv_var = np.zeros(n)
    for log_w, lo in strata:
        # weight of the stratum as a fraction of L
        frac = math.exp(log_w) if lo is None else 1.0 - lo
        counts = rng.multinomial(per, [1.0 / n] * n)
        for i, cnt in enumerate(counts):
            if cnt < 2:
                continue
            r = rng.random(cnt)
            t = rng.random(cnt)  # position across, as a fraction of ell
            if lo is None:
                with np.errstate(divide="ignore"):
                    log_u = log_w + np.log(r)  # u uniform on [0, near]
            else:
                log_u = np.log(lo + (1.0 - lo) * r)
            depth = np.ones(cnt)
            for j in range(n):
                if j == i:
                    continue
                depth += _member(rel[i, j], log_u, t, log_aspect)
            w = 1.0 / depth
            lv = np.stack([np.where(depth == m, w, 0.0) for m in range(1, n + 1)])
            # each rectangle contributes |Q| * frac * E[1/depth] over its stratum
            union_mean += frac * w.mean()
            union_var += frac ** 2 * w.var(ddof=1) / cnt
            lv_mean += frac * lv.mean(axis=1)
            lv_var += frac ** 2 * lv.var(axis=1, ddof=1) / cnt
    union = Measure(float(union_mean), math.sqrt(union_var), "monte-carlo")
    levels = {m: Measure(float(lv_mean[m - 1]), math.sqrt(lv_var[m - 1]), "monte-carlo")
              for m in range(1, n + 1)}
    return union, levels


def _member(rel, log_u, t, log_aspect):
    """Whether frame-``i`` points ``(u L, t ell)`` lie in rectangle ``j``."""
    sg, log_s, c = rel
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        # across-coordinate in frame j, in units of ell: sg u aspect |s| + t c
        e = np.clip(log_u + log_aspect + log_s, -745.0, 709.0)
        across = sg * np.exp(e) + t * c
        ok = (across >= 0) & (across <= 1)
        # along-coordinate in frame j, in units of L: u c - sg t |s| / aspect
        log_small = log_s - log_aspect
        if sg > 0:
            with np.errstate(divide="ignore"):
                ok &= log_u + math.log(c) >= np.log(t) + log_small
            ok &= np.exp(np.clip(log_u, -745.0, 0.0)) * c <= 1
        else:
            along = np.exp(np.clip(log_u, -745.0, 0.0)) * c + t * math.exp(max(log_small, -745.0))
            ok &= along <= 1
    return ok
