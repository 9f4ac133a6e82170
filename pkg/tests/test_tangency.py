import math
import pathlib
from types import SimpleNamespace

import numpy as np
import pytest

from folicheck import oracle
from folicheck.detline import ExprSection, det_section
from folicheck.errors import DegenerateSection, NonGenericLoopPlacement, SuspectedDegenerate
from folicheck.fields import jacobian_grid, make_domain, sample_params
from folicheck.scenarios import builtin, resolve
from folicheck.tangency import (
    crossing_parities,
    extract_zero_curve_2d,
    find_zeros_1d,
    loop_path,
    make_family,
    parity_check,
    pd_class_check,
    perturb_until_generic,
)

DATA = pathlib.Path(__file__).parent / "data"


def _run(sid, eps=None, seed=0, **params):
    sc = builtin(sid, params)
    e = sc.eps if eps is None else eps
    return sc, *perturb_until_generic(sc.embedding, sc.foliation, sc.family(e, seed))


def test_torus_is_transverse_without_perturbation():
    _, _, locus = _run("torus_pq", p=2, q=3)
    assert locus.empty
    assert locus.certificate.holds
    assert locus.certificate.min_abs_off == pytest.approx(3.0)


def test_klein_single_zero():
    _, _, locus = _run("klein_nonTO")
    (z,) = locus.zeros
    assert z.t == pytest.approx(0.0, abs=1e-12)
    assert z.derivative == pytest.approx(-math.pi**2 / 2)


def test_unperturbed_product_is_degenerate():
    sc = builtin("rp2_product")
    fam = make_family(sc.embedding, 0.0, 0)
    with pytest.raises(DegenerateSection):
        perturb_until_generic(sc.embedding, sc.foliation, fam)


def test_zero_winding_zeros():
    sc = builtin("torus_zero_winding")
    zs = find_zeros_1d(det_section(sc.embedding, sc.foliation), 512)
    assert [round(z.t, 12) for z in zs.zeros] == [0.25, 0.75]
    assert zs.certificate.holds


def test_grid_too_coarse():
    sc = builtin("klein_nonTO")
    with pytest.raises(ValueError):
        find_zeros_1d(det_section(sc.embedding, sc.foliation), 32)


def test_flat_double_zero_is_suspected_degenerate():
    ds = ExprSection("sin(pi*t)^4", make_domain("circle"), (1,))
    with pytest.raises(SuspectedDegenerate):
        find_zeros_1d(ds, 512)


def test_close_zeros_fail_the_certificate():
    ds = ExprSection("sin(2*pi*(t - 0.3))*sin(2*pi*(t - 0.3004))", make_domain("circle"), (1,))
    zs = find_zeros_1d(ds, 512)
    assert not zs.certificate.holds


def test_positive_section_has_no_curves():
    ds = ExprSection("2 + sin(2*pi*a)*cos(2*pi*t)", make_domain("torus"), (1, 1))
    cs = extract_zero_curve_2d(ds, 128)
    assert cs.curves == [] and cs.certificate.holds
    assert pd_class_check(cs, ds).passed


def test_sin_section_gives_two_vertical_circles():
    ds = ExprSection("sin(2*pi*a)", make_domain("torus"), (1, 1))
    cs = extract_zero_curve_2d(ds, 128)
    assert len(cs.curves) == 2
    for c in cs.curves:
        assert np.allclose(np.sin(2 * np.pi * c.vertices[:, 0]), 0, atol=1e-9)
    levels = sorted(round(float(c.vertices[0, 0]) % 1.0, 6) % 1.0 for c in cs.curves)
    assert levels == [0.0, 0.5]
    v = pd_class_check(cs, ds)
    assert v.passed
    assert all(row["parity"] == 0 for row in v.details["loops"].values())


def test_rp2_product_curves_and_pd_class():
    _, emb, locus = _run("rp2_product", eps=0.05, seed=1)
    assert len(locus.curves) >= 1
    v = pd_class_check(locus, locus.section)
    assert v.passed
    assert v.details["loops"]["gamma"]["parity"] == 1
    assert v.details["loops"]["Sigma"]["parity"] == 0


def test_curves_close_across_seams():
    _, _, locus = _run("rp2_product", eps=0.05, seed=3)
    for c in locus.curves:
        assert c.n_vertices >= 3
        assert np.all(np.abs(locus.section.evaluate(*c.vertices.T)) < 1e-9)


def test_empty_locus_with_trivial_pairings_passes():
    ds = ExprSection("3", make_domain("torus"), (1, 1))
    assert pd_class_check([], ds).passed


def test_loop_retries_exhausted():
    dom = make_domain("torus")
    a, b = loop_path(dom, 0, 0.2371)[0]
    mid = 0.5 * (a + b)
    normal = np.array([-(b - a)[1], (b - a)[0]])
    seg = np.array([[mid, mid + 0.01 * normal]])
    ds = ExprSection("a", dom, (1, 1))
    with pytest.raises(NonGenericLoopPlacement):
        crossing_parities([SimpleNamespace(segments=seg)], ds, max_retries=0)


def test_parity_verdicts_one_dimensional():
    for sid, count in (("torus_pq", 0), ("klein_nonTO", 1), ("torus_zero_winding", 2)):
        _, _, locus = _run(sid)
        v = parity_check(locus, locus.section)
        assert v.passed and v.details["zero_count"] == count


@pytest.mark.parametrize("sid", ["klein_nonTO", "torus_zero_winding", "oriented_null"])
def test_parity_stable_under_perturbation(sid):
    bits = set()
    for eps in (0.01, 0.05, 0.1):
        for seed in range(20):
            _, _, locus = _run(sid, eps=eps, seed=seed)
            assert locus.certificate.holds
            assert parity_check(locus, locus.section).passed
            bits.add(len(locus.zeros) % 2)
    assert len(bits) == 1


@pytest.mark.parametrize("sid", ["klein_nonTO", "torus_zero_winding", "oriented_null", "torus_pq"])
def test_zero_count_matches_dense_scan(sid):
    for seed in range(5):
        _, _, locus = _run(sid, eps=0.05, seed=seed)
        assert len(locus.zeros) == oracle.zero_count_1d(locus.section)


def test_certified_counts_survive_grid_doubling():
    for seed in range(5):
        _, _, locus = _run("klein_nonTO", eps=0.1, seed=seed)
        again = find_zeros_1d(locus.section, 2 * locus.grid_n)
        assert len(again.zeros) == len(locus.zeros)
    for seed in range(3):
        _, _, locus = _run("rp2_product", eps=0.05, seed=seed)
        base = crossing_parities(locus.curves, locus.section)
        fine = extract_zero_curve_2d(locus.section, 2 * locus.grid_n, certify=False)
        again = crossing_parities(fine.curves, locus.section)
        assert {k: v["parity"] for k, v in base.items()} == {k: v["parity"] for k, v in again.items()}


def test_null_homologous_locus_has_even_crossings():
    sc = resolve(str(DATA / "null_rp2.scn"))
    assert sc.family(0.05, 0) is not None
    for seed in range(4):
        emb, locus = perturb_until_generic(sc.embedding, sc.foliation, sc.family(0.05, seed))
        assert all(s == 1 for s in locus.section.seam_signs)
        table = crossing_parities(locus.curves, locus.section)
        assert all(row["parity"] == 0 for row in table.values())


@pytest.mark.parametrize("sid", ["torus_pq", "klein_nonTO", "torus_zero_winding"])
def test_perturbation_is_c1_small(sid):
    sc = builtin(sid)
    eps = 0.05
    fam = sc.family(eps, 9)
    assert fam.c1_bound == eps
    moved = fam.apply(sc.embedding, 0)
    t = np.linspace(0, 1, 2001)
    d = moved.points(t) - sc.embedding.points(t)
    dd = jacobian_grid(moved, t)[0] - jacobian_grid(sc.embedding, t)[0]
    c1 = np.max(np.abs(d), axis=1) + np.max(np.abs(dd), axis=1)
    assert np.all(c1 <= eps * (1 + 1e-9))


def test_perturbed_embeddings_stay_closed():
    sc = builtin("rp2_product")
    fam = sc.family(0.1, 5)
    for attempt in range(3):
        emb = fam.apply(sc.embedding, attempt)
        U = sample_params(2, 16)
        x = emb.points(*U)
        assert np.allclose(np.linalg.norm(x[1:], axis=0), 1.0)
