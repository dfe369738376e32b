from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from smepr.basis import (BasisBlock, bisquare_block_2d, build_basis_matrix, eval_bisquare, eval_gaussian_rbf,
                         make_knots_1d, pairwise_distance, rbf_block_1d)


def test_knots_examples():
    np.testing.assert_allclose(make_knots_1d(0, 10, 2), [0, 10])
    np.testing.assert_allclose(make_knots_1d(0, 10, 3), [0, 5, 10])
    np.testing.assert_allclose(make_knots_1d(0, 1, 1), [0.5])


def test_rbf_values():
    assert eval_gaussian_rbf(np.array([2.0]), np.array([2.0]), 1.5) == 1.0
    np.testing.assert_allclose(eval_gaussian_rbf(np.array([3.5]), np.array([2.0]), 1.5), np.exp(-0.5))
    d = np.linspace(0, 50, 200)
    vals = eval_gaussian_rbf(d[:, None], np.array([0.0]), 2.0)
    assert np.all(np.diff(vals) <= 0) and vals[-1] < 1e-100


def test_bisquare_values():
    c = np.array([0.0, 0.0])
    assert eval_bisquare(c, c, 2.0) == 1.0
    assert eval_bisquare(np.array([2.0, 0.0]), c, 2.0) == 0.0
    np.testing.assert_allclose(eval_bisquare(np.array([0.0, 1.0]), c, 2.0), 0.5625)


def test_shared_block_rows_identical():
    s = np.linspace(0, 1, 7)
    G = build_basis_matrix(s, [rbf_block_1d(0, 1, 3, scope=None)], K=2)
    np.testing.assert_array_equal(G[:7], G[7:])


def test_biv_layout_zero_columns():
    s = np.arange(1.0, 101.0)
    blocks = [rbf_block_1d(1, 100, 15, scope=1), rbf_block_1d(1, 100, 15, scope=2),
              rbf_block_1d(1, 100, 15, scope=None)]
    G = build_basis_matrix(s, blocks, K=2)
    assert G.shape == (200, 45)
    np.testing.assert_array_equal(G[:100, 15:30], 0.0)
    np.testing.assert_array_equal(G[100:, :15], 0.0)


def test_single_bisquare_knot_at_site():
    site = np.array([[3.0, 4.0]])
    G = build_basis_matrix(site, [BasisBlock("bisquare", site, 1.0)], K=1)
    np.testing.assert_array_equal(G, [[1.0]])


def test_greatcircle_quarter_turn():
    a = np.array([[0.0, 0.0]])
    b = np.array([[90.0, 0.0]])
    np.testing.assert_allclose(pairwise_distance(a, b, "greatcircle"), [[90.0]])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=2, max_size=25),
       st.integers(1, 4), st.integers(1, 4))
def test_bisquare_hard_zero_and_row_norm_bound(points, gx, gy):
    coords = np.array(points)
    if np.ptp(coords[:, 0]) == 0 or np.ptp(coords[:, 1]) == 0:
        coords = np.vstack([coords, coords[0] + 1.0])
    block = bisquare_block_2d(coords, (gx, gy), radius_factor=1.0)
    G = build_basis_matrix(coords, [block], K=1)
    d = pairwise_distance(coords, block.knots)
    assert np.all(G[d >= block.bandwidth] == 0.0)
    assert np.all(np.linalg.norm(G, axis=1) <= np.sqrt(G.shape[1]) + 1e-12)


def test_individual_block_zero_on_other_type():
    s = np.linspace(0, 1, 9)
    G = build_basis_matrix(s, [rbf_block_1d(0, 1, 4, scope=2)], K=3)
    assert G[:9].sum() == 0 and G[18:].sum() == 0 and G[9:18].sum() > 0
