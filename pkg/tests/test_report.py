import json

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from folicheck import oracle
from folicheck.report import aggregate, canonical_json, check_expectations, report_fields, run_check, run_sweep
from folicheck.scenarios import builtin

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=5),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=4), inner, max_size=4),
    max_leaves=20,
)


@settings(max_examples=200, deadline=None)
@given(json_values)
def test_canonical_json_is_a_fixed_point(obj):
    text = canonical_json(obj)
    assert canonical_json(json.loads(text)) == text


def test_canonical_json_normalises_numpy_and_floats():
    text = canonical_json({"b": np.float64(0.1 + 0.2), "a": np.int64(3), "c": -0.0, "d": np.array([True])})
    assert text == '{\n  "a": 3,\n  "b": 0.3,\n  "c": 0.0,\n  "d": [\n    true\n  ]\n}\n'


def test_report_fields_and_expectations():
    sc = builtin("torus_pq")
    data = run_check(sc).data
    fields = report_fields(data)
    assert fields["winding_degree"] == 3 and fields["verdict.parity"] == "pass"
    assert check_expectations({"sheet_count": 3}, data) == []
    assert check_expectations({"sheet_count": 2}, data) == [("sheet_count", 2, 3)]


def test_sweep_rows_sorted_and_aggregated():
    rows, summary = run_sweep(builtin("klein_nonTO"), [3, 1, 2], [0.1, 0.01])
    assert [(r["seed"], r["eps"]) for r in rows] == [(s, e) for s in (1, 2, 3) for e in (0.01, 0.1)]
    assert summary == aggregate(rows)
    assert summary["completed"] == 6 and summary["parities"] == ["1"]


def test_unperturbed_sweep_uses_default_eps():
    rows, _ = run_sweep(builtin("torus_pq"), [0, 1])
    assert {r["eps"] for r in rows} == {0.05}


def test_grid_doubling_recorded_for_surfaces():
    data = run_check(builtin("rp2_product"), seed=2).data
    assert data["grid_doubling"]["stable"] is True


def test_oracle_dense_counts_agree_for_curves():
    for seed in range(3):
        rep = run_check(builtin("klein_nonTO"), eps=0.1, seed=seed, doubling=False)
        assert oracle.zero_count_1d(rep.locus.section) == rep.data["zero_count"]


def test_oracle_preimages_of_torus_curve():
    sc = builtin("torus_pq", {"p": 2, "q": 5})
    assert oracle.preimage_count_1d(sc.embedding, 0, 0.123) == 5
