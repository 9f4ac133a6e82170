import math

import numpy as np
import pytest

from folicheck.detline import (
    det_section,
    generator_loops,
    normal_seam_sign,
    tangent_seam_sign,
    w1_identity_check,
    w1_pairing,
)
from folicheck.scenarios import BUILTIN_IDS, builtin
from folicheck.tangency import find_zeros_1d


def _section(sid, eps=None, seed=0, **params):
    sc = builtin(sid, params)
    emb = sc.embedding
    e = sc.eps if eps is None else eps
    if e > 0:
        emb = sc.family(e, seed).apply(emb, 0)
    return det_section(emb, sc.foliation)


def test_torus_section_is_constant():
    ds = _section("torus_pq", p=2, q=3)
    assert np.allclose(ds.evaluate(np.linspace(0, 1, 33)), 3.0)
    assert ds.seam_signs == (1,)
    assert w1_pairing(ds, generator_loops(ds.domain)[0]) == 0
    v = w1_identity_check(ds)
    assert v.passed and v.rows == (("S", 0, 0, 0),)


def test_klein_section_and_pairings():
    ds = _section("klein_nonTO")
    t = np.linspace(0, 1, 21)
    assert np.allclose(ds.evaluate(t), -0.5 * math.pi * np.sin(math.pi * t))
    assert ds.ts_signs == (1,) and ds.nu_signs == (-1,) and ds.seam_signs == (-1,)
    (loop,) = generator_loops(ds.domain)
    assert w1_pairing(ds, loop) == 1
    v = w1_identity_check(ds)
    assert v.passed and v.rows == (("S", 0, 1, 1),)


def test_rp2_product_pairings():
    ds = _section("rp2_product", eps=0.05, seed=1)
    assert ds.seam_signs == (1, -1)
    loops = {l.name: l for l in generator_loops(ds.domain)}
    assert w1_pairing(ds, loops["Sigma"]) == 0
    assert w1_pairing(ds, loops["gamma"]) == 1
    v = w1_identity_check(ds)
    assert v.passed
    assert ("gamma", 0, 1, 1) in v.rows


@pytest.mark.parametrize("sid", BUILTIN_IDS)
def test_section_equivariance(sid):
    sc = builtin(sid)
    ds = _section(sid, eps=sc.eps or 0.05, seed=4)
    assert ds.equivariance_error() <= 1e-9


@pytest.mark.parametrize("sid", BUILTIN_IDS)
def test_identity_holds_under_perturbation(sid):
    sc = builtin(sid)
    for seed in range(50):
        ds = det_section(sc.family(0.05, seed).apply(sc.embedding, 0), sc.foliation)
        assert w1_identity_check(ds).passed


@pytest.mark.parametrize("sid", BUILTIN_IDS)
def test_seam_signs_stable_under_refinement(sid):
    sc = builtin(sid)
    emb = sc.family(sc.eps or 0.05, 2).apply(sc.embedding, 0)
    for i in range(emb.domain.dim):
        assert tangent_seam_sign(emb, i, 32) == tangent_seam_sign(emb, i, 64)
        assert normal_seam_sign(emb, sc.foliation, i, 32) == normal_seam_sign(emb, sc.foliation, i, 64)


def test_nonvanishing_section_has_trivial_pairings():
    sc = builtin("torus_pq")
    for seed in range(10):
        ds = det_section(sc.family(0.05, seed).apply(sc.embedding, 0), sc.foliation)
        zs = find_zeros_1d(ds, 512)
        assert zs.certificate.holds and not zs.zeros
        assert all(s == 1 for s in ds.seam_signs)
