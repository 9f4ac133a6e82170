import math

import numpy as np
import pytest

from folicheck.errors import ValidationError
from folicheck.fields import (
    check_closure,
    check_immersion,
    dperp,
    jacobian,
    make_domain,
    make_embedding,
    sample_params,
)
from folicheck.modelspace import torus2
from folicheck.scenarios import BUILTIN_IDS, builtin


def test_torus_jacobian_is_slope_vector():
    sc = builtin("torus_pq", {"p": 2, "q": 3})
    for t in (0.0, 0.37, 0.9):
        (col,) = jacobian(sc.embedding, t)
        assert np.allclose(col, [3, 2])


def test_klein_jacobian_at_zero():
    sc = builtin("klein_nonTO")
    (col,) = jacobian(sc.embedding, 0.0)
    assert np.allclose(col, [1, 0], atol=1e-15)


def test_constant_map_is_not_an_immersion():
    with pytest.raises(ValidationError) as err:
        make_embedding(torus2(), make_domain("circle"), {"theta": "0.3", "phi": "0.7"})
    assert err.value.field == "immersion"


def test_non_closing_map_is_rejected():
    with pytest.raises(ValidationError) as err:
        make_embedding(torus2(), make_domain("circle"), {"theta": "0.5*t", "phi": "t"})
    assert err.value.field == "closure"


def test_sphere_columns_are_tangent():
    sc = builtin("rp2_product")
    emb = sc.family(0.05, 1).apply(sc.embedding, 0)
    for a, t in zip(*sample_params(2, 16)):
        x = emb.points(a, t)
        for col in jacobian(emb, [a, t]):
            assert abs(np.dot(col[1:], x[1:])) <= 1e-9


def test_torus_dperp_is_constant_q():
    sc = builtin("torus_pq", {"p": 2, "q": 3})
    for t in np.arange(64) / 64:
        m = dperp(sc.embedding, sc.foliation, t)
        assert m.entries.shape == (1, 1)
        assert abs(m.det - 3.0) <= 1e-12


def test_klein_dperp_is_phi_prime():
    sc = builtin("klein_nonTO")
    for t in np.linspace(0, 1, 17):
        want = -0.5 * math.pi * math.sin(math.pi * t)
        assert dperp(sc.embedding, sc.foliation, t).det == pytest.approx(want, abs=1e-12)


def test_unperturbed_rp2_product_has_a_zero_row():
    sc = builtin("rp2_product")
    for a, t in zip(*sample_params(2, 8)):
        m = dperp(sc.embedding, sc.foliation, [a, t])
        zero_rows = [np.allclose(r, 0, atol=1e-12) for r in m.entries]
        assert any(zero_rows)
        assert m.det == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("sid", BUILTIN_IDS)
def test_builtin_embeddings_close_and_immerse(sid):
    sc = builtin(sid)
    emb = sc.embedding
    if sc.requires_eps:
        emb = sc.family(sc.eps, 0).apply(emb, 0)
    assert check_closure(emb) <= 1e-9
    assert check_immersion(emb) >= 1e-8


def test_positive_frame_rescaling_keeps_zero_set():
    sc = builtin("torus_zero_winding")
    ts = (np.arange(400) + 0.5) / 400
    dets = np.array([dperp(sc.embedding, sc.foliation, t).det for t in ts])
    rng = np.random.default_rng(3)
    for _ in range(3):
        c = rng.uniform(0.2, 2.0, 3)
        # a smooth positive factor on the normal frame scales the 1x1 block by its inverse
        scale = c[0] + 0.5 * c[1] * (1 + np.sin(2 * np.pi * (ts + c[2])))
        rescaled = dets / scale
        assert np.array_equal(np.sign(rescaled), np.sign(dets))
        assert np.allclose(rescaled * scale, dets)
