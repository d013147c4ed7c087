import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nehari.domain import (GridFunction, ParamError, ProblemParams, WeightPair, WeightSpecError,
                           build_grid, load_weight, lp_weighted_sum, positive_part,
                           read_grid_function, write_grid_function)


def test_params_reference_derived_values():
    prm = ProblemParams(0.4, 2.0, 0.5, 3.0, 1.0)
    assert prm.ps == pytest.approx(0.8)
    assert prm.p_star == pytest.approx(10.0)


@pytest.mark.parametrize("kwargs, needle", [
    (dict(s=0.4, p=2, q=1.5, r=3), "0 < q < 1"),
    (dict(s=0.0, p=2, q=0.5, r=3), "0 < s < 1"),
    (dict(s=0.6, p=2, q=0.5, r=3), "p*s"),
    (dict(s=0.4, p=2, q=0.5, r=0.8), "p - 1 < r"),
    (dict(s=0.4, p=2, q=0.5, r=9.5), "r >= p_s^* - 1"),
    (dict(s=0.2, p=1.4, q=0.5, r=3), "q < p - 1"),
    (dict(s=0.4, p=2, q=0.5, r=3, lam=-1.0), "lambda > 0"),
])
def test_params_reject_with_named_constraint(kwargs, needle):
    with pytest.raises(ParamError) as info:
        ProblemParams(**kwargs)
    assert needle in str(info.value)


def test_grid_three_nodes():
    g = build_grid(3)
    assert g.h == 0.5
    np.testing.assert_array_equal(g.nodes, [-0.5, 0.0, 0.5])


def test_grid_reference_spacing():
    g = build_grid(255)
    assert g.h == 0.0078125
    assert np.all(np.diff(g.nodes) > 0)
    assert -1 < g.nodes[0] and g.nodes[-1] < 1
    assert np.all(g.quad_weights > 0)
    assert g.quad_weights.sum() == pytest.approx(255 * g.h)
    assert g.is_symmetric()


def test_grid_too_small():
    with pytest.raises(ValueError):
        build_grid(2)


def test_grid_function_rejects_nonfinite():
    g = build_grid(3)
    with pytest.raises(ValueError):
        GridFunction(g, [0.0, np.nan, 1.0])
    w = GridFunction(g, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        w.values[0] = 5.0


def test_load_weight_forms(tmp_path):
    g = build_grid(3)
    np.testing.assert_array_equal(load_weight("constant 1", g).values, 1.0)
    assert abs(load_weight("cos 1", g).values[2]) <= 1e-15
    table = tmp_path / "t.csv"
    table.write_text("x,value\n-1,0\n1,2\n")
    assert load_weight(f"csv {table}", g).values[1] == 1.0
    # relative paths resolve against base_dir
    assert load_weight("csv t.csv", g, base_dir=tmp_path).values[1] == 1.0
    gauss = load_weight("gaussian 0 0.5", g).values
    assert gauss[1] == 1.0 and gauss[0] == pytest.approx(np.exp(-1.0))


def test_load_weight_errors(tmp_path):
    g = build_grid(5)
    short = tmp_path / "short.csv"
    short.write_text("-0.5,1\n1,1\n")
    with pytest.raises(WeightSpecError, match="cover"):
        load_weight(f"csv {short}", g)
    bad = tmp_path / "bad.csv"
    bad.write_text("-1,1\n0,nan\n1,1\n")
    with pytest.raises(WeightSpecError, match="non-finite"):
        load_weight(f"csv {bad}", g)
    with pytest.raises(WeightSpecError, match="unknown"):
        load_weight("sinc 2", g)
    with pytest.raises(WeightSpecError):
        load_weight("constant", g)


def test_weight_pair_assumptions():
    g = build_grid(5)
    one = GridFunction(g, np.ones(5))
    with pytest.raises(WeightSpecError, match="strictly positive"):
        WeightPair(GridFunction(g, [1, 1, 0, 1, 1]), one)
    with pytest.raises(WeightSpecError, match="b\\+"):
        WeightPair(one, GridFunction(g, -np.ones(5)))
    pair = WeightPair.unchecked(one, GridFunction(g, np.zeros(5)))
    assert np.all(pair.b.values == 0)


def test_positive_part_examples():
    g = build_grid(3)
    np.testing.assert_array_equal(positive_part(GridFunction(g, [-1, 0, 2])).values, [0, 0, 2])
    w = GridFunction(g, [0.5, 0.0, 2.0])
    np.testing.assert_array_equal(positive_part(w).values, w.values)
    np.testing.assert_array_equal(positive_part(GridFunction(g, [-1, -2, -3])).values, 0.0)


def test_lp_weighted_sum_examples():
    g = build_grid(3)
    assert lp_weighted_sum(GridFunction(g, np.ones(3)), 1) == 1.5
    assert lp_weighted_sum(GridFunction(g, np.zeros(3)), 2.5) == 0.0
    assert lp_weighted_sum(GridFunction(g, np.full(3, 2.0)), 3) == 12.0
    assert lp_weighted_sum(GridFunction(g, [-1.0, 2.0, 0.0]), 2) == 2.5
    with pytest.raises(ValueError):
        lp_weighted_sum(GridFunction(g, [-1.0, 2.0, 0.0]), 0.5)


def test_csv_round_trip_bit_exact(tmp_path):
    g = build_grid(255)
    rng = np.random.default_rng(0)
    w = GridFunction(g, rng.standard_normal(255) * 10.0 ** rng.uniform(-20, 20, 255))
    path = tmp_path / "w.csv"
    write_grid_function(w, path)
    back = read_grid_function(path, g)
    assert np.array_equal(back.values, w.values)


values = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=40)


@settings(max_examples=60, deadline=None)
@given(values)
def test_positive_part_idempotent(vals):
    w = GridFunction(build_grid(len(vals)), vals)
    once = positive_part(w)
    np.testing.assert_array_equal(positive_part(once).values, once.values)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1e3, allow_nan=False), min_size=3, max_size=40),
       st.floats(1e-3, 1e3), st.floats(0.1, 6.0))
def test_lp_weighted_sum_homogeneous(vals, c, m):
    f = GridFunction(build_grid(len(vals)), vals)
    lhs = lp_weighted_sum(c * f, m)
    rhs = c ** m * lp_weighted_sum(f, m)
    assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-300)
