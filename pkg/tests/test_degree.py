import math
from types import SimpleNamespace

import pytest

from folicheck import degree as D
from folicheck.errors import NoRegularValue, NotTransverse
from folicheck.fields import make_domain, make_embedding
from folicheck.modelspace import torus2
from folicheck.scenarios import builtin
from folicheck.tangency import perturb_until_generic


def _torus(p, q):
    sc = builtin("torus_pq", {"p": p, "q": q})
    return sc.embedding, sc.foliation


def _generic(sid, eps=None, seed=0):
    sc = builtin(sid)
    e = sc.eps if eps is None else eps
    emb, locus = perturb_until_generic(sc.embedding, sc.foliation, sc.family(e, seed))
    return sc, emb, locus


def test_winding_small_slopes_exhaustive():
    for p in range(-7, 8):
        for q in range(-7, 8):
            if q == 0 or math.gcd(p, q) != 1:
                continue
            assert D.winding_degree(*_torus(p, q)) == q, (p, q)


def test_winding_reversed_orientation():
    assert D.winding_degree(*_torus(1, -2)) == -2


def test_zero_winding_degree():
    sc = builtin("torus_zero_winding")
    assert D.winding_degree(sc.embedding, sc.foliation) == 0


def test_torus_mod2_and_sheets():
    emb, fol = _torus(2, 3)
    bit, pre, accepted = D.mod2_degree(emb, fol)
    assert bit == 1 and pre.count == 3
    assert accepted == 16
    cov = D.covering_check(emb, fol)
    assert cov["sheet_count"] == 3
    assert cov["counts"] == [3] * 8
    assert cov["witnesses"]


def test_diffeomorphic_slice_has_one_sheet():
    assert D.covering_check(*_torus(1, 1))["sheet_count"] == 1


def test_zero_winding_is_not_a_covering():
    sc = builtin("torus_zero_winding")
    with pytest.raises(NotTransverse):
        D.covering_check(sc.embedding, sc.foliation)
    assert D.mod2_degree(sc.embedding, sc.foliation)[0] == 0


def test_rp2_mod2_degree_is_even():
    for seed in range(3):
        sc, emb, _ = _generic("rp2_product", eps=0.05, seed=seed)
        bit, pre, accepted = D.mod2_degree(emb, sc.foliation)
        assert bit == 0 and pre.count % 2 == 0 and accepted >= 1


def test_no_regular_value(monkeypatch):
    emb = make_embedding(torus2(), make_domain("circle"), {"theta": "0.3 + 0.05*sin(2*pi*t)", "phi": "t"})
    _, fol = _torus(2, 3)
    # 0.35 is the critical value of the fold
    monkeypatch.setattr(D, "candidates", lambda base, k=16: [(0.35,)])
    with pytest.raises(NoRegularValue):
        D.mod2_degree(emb, fol)


def test_mod2_matches_integer_degree():
    for p, q in ((1, 2), (2, 3), (3, -4), (1, 5)):
        emb, fol = _torus(p, q)
        assert D.mod2_degree(emb, fol)[0] == abs(D.winding_degree(emb, fol)) % 2


def test_verdict_torus_is_silent():
    sc, emb, locus = _generic("torus_pq")
    rep = D.degree_report(emb, sc.foliation, locus)
    assert rep.integer_degree == 3 and rep.sheet_count == 3 and rep.covering_checked
    v = D.degree_criterion_verdict(sc.foliation, rep, locus)
    assert v.passed
    assert v.details["outcome"] == D.SILENT
    assert "meets every leaf" in v.details["note"]


def test_verdict_zero_winding_confirmed():
    sc, emb, locus = _generic("torus_zero_winding")
    rep = D.degree_report(emb, sc.foliation, locus)
    assert rep.integer_degree == 0 and rep.sheet_count == D.NOT_COVERING
    v = D.degree_criterion_verdict(sc.foliation, rep, locus)
    assert v.passed and v.details["outcome"] == D.CONFIRMED


def test_verdict_klein_not_applicable():
    sc, _, locus = _generic("klein_nonTO")
    v = D.degree_criterion_verdict(sc.foliation, None, locus)
    assert v.passed is None
    assert v.details["outcome"] == D.NOT_APPLICABLE


def test_verdict_flags_inconsistency():
    _, fol = _torus(2, 3)
    fake = SimpleNamespace(integer_degree=0, mod2_degree=0)
    v = D.degree_criterion_verdict(fol, fake, SimpleNamespace(empty=True))
    assert v.passed is False and v.details["outcome"] == D.INCONSISTENT
    fake = SimpleNamespace(integer_degree=2, mod2_degree=0)
    v = D.degree_criterion_verdict(fol, fake, SimpleNamespace(empty=False))
    assert v.details["outcome"] == D.SILENT_TANGENT


def test_rp2_report_uses_mod2_datum():
    sc, emb, locus = _generic("rp2_product", eps=0.05, seed=1)
    rep = D.degree_report(emb, sc.foliation, locus)
    assert rep.integer_degree == D.UNDEFINED
    assert any("nonorientable" in n for n in rep.notes)
    v = D.degree_criterion_verdict(sc.foliation, rep, locus)
    assert v.details["degree_datum"] == 0 and v.details["outcome"] == D.CONFIRMED
