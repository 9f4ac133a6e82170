from dataclasses import replace

import pytest

from folicheck.errors import BadParams, ParseError, UnknownScenario, ValidationError
from folicheck.report import check_expectations, run_check
from folicheck.scenarios import BUILTIN_IDS, builtin, dump_scenario, equivalent, load_scenario, resolve

TORUS = """
# slope 2/3
[scenario]
id = mine
[model]
space = torus2
[foliation]
id = vertical_circles
[embedding]
domain = circle
theta = 3*t; phi = 2*t
"""


def test_builtin_ids():
    assert set(BUILTIN_IDS) == {"torus_pq", "torus_zero_winding", "klein_nonTO", "rp2_product", "oriented_null"}


@pytest.mark.parametrize("params", [{"p": 2, "q": 4}, {"p": 1, "q": 0}, {"p": 1.5, "q": 2}, {"r": 0.3}])
def test_bad_torus_params(params):
    with pytest.raises(BadParams):
        builtin("torus_pq", params)


def test_unknown_scenario():
    with pytest.raises(UnknownScenario):
        builtin("torus_qp")
    with pytest.raises(UnknownScenario):
        resolve("no/such/file.scn")


def test_product_needs_eps():
    with pytest.raises(BadParams):
        builtin("rp2_product", eps=0)


@pytest.mark.parametrize("sid", BUILTIN_IDS)
def test_dump_load_round_trip(sid):
    sc = builtin(sid)
    back = load_scenario(dump_scenario(sc))
    assert equivalent(sc, back, ignore_id=False)


def test_minimal_file_matches_builtin():
    sc = load_scenario(TORUS)
    assert sc.id == "mine"
    assert equivalent(sc, replace(builtin("torus_pq"), expected={}))


def test_non_closing_embedding_is_rejected():
    text = TORUS.replace("theta = 3*t", "theta = 0.5*t")
    with pytest.raises(ValidationError) as err:
        load_scenario(text)
    assert err.value.field == "closure"


def test_unknown_foliation():
    with pytest.raises(ValidationError) as err:
        load_scenario(TORUS.replace("vertical_circles", "spirals"))
    assert err.value.field == "foliation"


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError) as err:
        load_scenario(TORUS.replace("theta = 3*t", "theta = 3*"))
    assert err.value.line == 11
    with pytest.raises(ParseError) as err:
        load_scenario(TORUS + "[extras]\n")
    assert err.value.line == 12
    with pytest.raises(ParseError):
        load_scenario("[model]\nspace torus2\n")


def test_expectation_keys_are_validated():
    with pytest.raises(ValidationError):
        load_scenario(TORUS + "[expect]\ncrossing_parity.gamma = 1\n")
    with pytest.raises(ValidationError):
        load_scenario(TORUS + "[expect]\nwinding = 3\n")
    sc = load_scenario(TORUS + "[expect]\nw1.S.L = 0\nverdict.parity = pass\n")
    assert sc.expected == {"w1.S.L": 0, "verdict.parity": "pass"}


def test_file_overrides():
    sc = load_scenario(TORUS)
    assert sc.eps == 0.0 and sc.seed == 0


@pytest.mark.parametrize("sid", BUILTIN_IDS)
def test_builtin_expectations_hold(sid):
    sc = builtin(sid)
    rep = run_check(sc, doubling=False)
    assert check_expectations(sc.expected, rep.data) == []
