import math
from functools import lru_cache

import mpmath
import pytest
from mpmath import mpf

from rarebasis import angles, construct, geom, orlicz
from rarebasis.angles import SeparationCertificate
from rarebasis.construct import DerivedConstants

REGIMES = ("lacunary", "superlacunary", "power")


@lru_cache(maxsize=None)
def setup(regime, n=12):
    spec = angles.DEFAULT_SPECS[regime]
    spec = angles.AngleSequenceSpec(**{**spec.__dict__, "n": max(spec.n, n)})
    return angles.generate(spec), angles.derive_certificate(spec, normalize=True)


@lru_cache(maxsize=None)
def built(regime, k):
    seq, cert = setup(regime)
    return construct.build_construction(seq, cert, k, 1)


def test_derived_constants_at_two():
    K = DerivedConstants.from_C(2)
    assert float(K.cC) == 2.0
    assert float(K.dC) == pytest.approx(2 * math.sqrt(2), rel=1e-15)
    assert float(K.eC) == 0.5
    assert float(K.gamma) == pytest.approx(1 / math.pi, rel=1e-15)
    assert float(K.gamma_prime) == pytest.approx(math.pi / (8 * math.sqrt(2)), rel=1e-15)


def test_shape_formula_example():
    cert = SeparationCertificate("lacunary", mpf(2), mpf(0.25), "k")
    ratio = construct.shape_ratio(cert, 1)
    assert float(ratio ** 2) == pytest.approx(1028.0, rel=1e-15)
    assert float(ratio) == pytest.approx(32.06, abs=5e-3)
    assert 32 <= ratio <= 2 * math.sqrt(2) * 16
    assert 2 * math.sqrt(2) * 16 == pytest.approx(45.25, abs=5e-3)


def test_build_interval_epsilon():
    seq, cert = setup("lacunary")
    L, ell = construct.build_interval(cert, 3, 1e-3)
    assert L <= 1e-3 and 0 < 2 * ell < L
    with pytest.raises(ValueError):
        construct.build_interval(cert, 0, 1)
    with pytest.raises(ValueError):
        construct.build_interval(cert, 1, 0)


@pytest.mark.parametrize("regime", REGIMES)
@pytest.mark.parametrize("k", range(1, 11))
def test_shape_sandwich(regime, k):
    seq, cert = setup(regime)
    K = DerivedConstants.from_C(cert.C)
    L, ell = construct.build_interval(cert, k, 1)
    with mpmath.workprec(angles.SEQ_PREC):
        scaled = L / ell * cert.zeta ** cert.t(2 * k)
        # the lower side is attained in the limit, so compare at relative 1e-12
        assert scaled >= K.cC * (1 - mpf(1e-12))
        assert scaled <= K.dC * (1 + mpf(1e-12))


def test_construction_sizes():
    assert len(built("lacunary", 1).rects()) == 2
    c = built("lacunary", 4)
    assert len(c.rects()) == 5
    assert c.Theta.radius == c.ell
    need = c.cert.C / 2 * c.cert.zeta ** c.cert.t(4)
    ms = c.tangents
    for i in range(5):
        for j in range(i + 1, 5):
            with mpmath.workprec(angles.SEQ_PREC):
                assert (ms[i] - ms[j]) / (1 + ms[i] * ms[j]) >= need


def test_capacity():
    seq, cert = setup("lacunary", 30)
    with pytest.raises(geom.CapacityError):
        construct.build_construction(seq, cert, 21, 1)


def test_nested_family():
    seq, cert = setup("lacunary")
    fam = construct.build_nested_family(seq, cert, 3)
    assert [c.k for c in fam] == [1, 2, 3]
    assert fam[1].L <= fam[0].ell
    assert fam[2].L <= min(fam[1].ell, mpf(1) / 2)
    for a, b in zip(fam, fam[1:]):
        assert b.L <= a.L and b.ell <= a.ell
    for c in fam[1:]:
        with mpmath.workprec(angles.SEQ_PREC):
            assert mpmath.sqrt(c.L ** 2 + c.ell ** 2) <= mpf(1) / (c.k - 1)


@pytest.mark.parametrize("regime", REGIMES)
def test_nested_diameters_decrease(regime):
    seq, cert = setup(regime)
    fam = construct.build_nested_family(seq, cert, 8)
    diam = [c.L ** 2 + c.ell ** 2 for c in fam]
    assert all(b < a for a, b in zip(diam, diam[1:]))


def test_union_and_halves_k4():
    c = built("lacunary", 4)
    g = c.geometry
    assert float(g.halfrect_union().value / c.Q_area) == pytest.approx(2.5, rel=1e-12)
    assert g.union() >= 2 * c.Q_area


@pytest.mark.parametrize("regime", REGIMES)
@pytest.mark.parametrize("k", [2, 5, 8])
def test_halfrect_disjointness(regime, k):
    c = built(regime, k)
    g = c.geometry
    g.halfrect_union()
    assert g.halfrect_pair_max < 1e-12 * c.Q_area


@pytest.mark.parametrize("regime", REGIMES)
@pytest.mark.parametrize("k", [2, 4, 6])
def test_partition_identity_and_quarter_disk(regime, k):
    c = built(regime, k)
    g = c.geometry
    with mpmath.workprec(g.prec):
        total = sum(m * v for m, v in g.levels().items())
        assert abs(total / ((k + 1) * c.Q_area) - 1) < 1e-10
    for i in range(k + 1):
        with mpmath.workprec(g.prec):
            d = geom.disk_polygon_area(c.Theta, g.polys[i])
            assert abs(d / (mpmath.pi * c.ell ** 2 / 4) - 1) < 1e-9


@pytest.mark.parametrize("regime", REGIMES)
def test_level_set_bound(regime):
    c = built(regime, 6)
    lv = c.geometry.levels()
    for j in range(1, 7):
        assert lv.get(j + 1, 0) <= construct.level_rhs(c, c.geometry.full, j) * (1 + 1e-9)


def test_overlap_bound_identity_values():
    # the j = 0 term of the bound carries zeta**(t(2k) - t(i)) instead of a constant
    c = built("lacunary", 4)
    g = c.geometry
    phi = orlicz.identity()
    full = g.full
    lhs = sum(phi(m) * v for m, v in g.levels(full).items())
    assert float(lhs / c.Q_area) == pytest.approx(5.0, rel=1e-12)
    rhs = construct.overlap_rhs(c, phi, full)
    assert float(rhs / c.Q_area) == pytest.approx(0.1146984916, rel=1e-9)
    single = construct.overlap_rhs(c, phi, 1)
    assert float(single / c.Q_area) == pytest.approx(7.220283075e-05, rel=1e-9)
    rep = construct.verify_lemmaA(c, ["identity"])
    iv = [r for r in rep.rows if r.check == "lemmaA.iv"]
    assert iv and not any(r.passed for r in iv)


@pytest.mark.parametrize("regime", REGIMES)
def test_overlap_bound_conjugate_passes(regime):
    rep = construct.verify_lemmaA(built(regime, 5), ["conjugate"])
    assert rep.passed, [r.detail for r in rep.failures()]
    assert any("coverage" in n for n in rep.notes)


def test_subset_masks():
    assert construct.contiguous_masks(3) == [0b1, 0b11, 0b111, 0b10, 0b110, 0b100]
    assert construct.sample_masks(6, 10, 3) == construct.sample_masks(6, 10, 3)
    masks = construct.default_masks(4, 0, 0, exhaustive=True)
    assert masks == list(range(1, 16))


@pytest.mark.parametrize("regime", REGIMES)
def test_disk_checks(regime):
    c = built(regime, 6)
    rep = construct.verify_propB(c)
    assert rep.passed, [r.detail for r in rep.failures()]
    K = c.constants
    with mpmath.workprec(angles.SEQ_PREC):
        measured = c.geometry.union() / (6 / c.zeta_t2k * c.Theta_area)
        assert measured >= K.cC / (2 * mpmath.pi)


def test_disk_checks_include_overlap_rows():
    rep = construct.verify_propB(built("power", 3), ["conjugate"], random_subsets=5)
    assert any(r.check == "lemmaA.iv" for r in rep.rows)


@pytest.mark.parametrize("regime", REGIMES)
def test_union_against_monte_carlo_k4(regime):
    c = built(regime, 4)
    union, _ = c.geometry.monte_carlo(10**6, 4)
    exact = float(c.geometry.union() / c.Q_area)
    assert abs(exact - union.value) <= 3 * union.stderr + 1e-12 * exact


@pytest.mark.parametrize("regime", REGIMES)
def test_levels_against_monte_carlo_k5(regime):
    c = built(regime, 5)
    _, mc = c.geometry.monte_carlo(10**6, 5)
    for m, v in c.geometry.levels().items():
        exact = float(v / c.Q_area)
        assert abs(exact - mc[m].value) <= 3 * mc[m].stderr + 1e-12 * max(exact, 1e-300)


def test_truncated_family_matches_direct_clipping():
    # a family small enough to clip without truncation
    ms = [mpf("0.4"), mpf("0.3"), mpf("0.25")]
    fam = construct.TruncatedFamily(ms, 0, 1000, 1)
    assert fam.truncated
    with mpmath.workprec(200):
        polys = [geom.rect_polygon(mpmath.atan(m), mpf(0), mpf(1000), mpf(0), mpf(1)) for m in ms]
        direct = geom.union_area(polys).value
    assert abs(fam.union() / direct - 1) < 1e-30


def test_truncated_family_rejects_bad_input():
    with pytest.raises(geom.InvalidFamilyError):
        construct.TruncatedFamily([mpf("0.3"), mpf("0.4")], 0, 10, 1)
    with pytest.raises(ValueError):
        construct.TruncatedFamily([mpf("0.3")], 1, 10, 1)
