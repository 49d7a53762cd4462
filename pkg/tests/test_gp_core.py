import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mog3p.gp_core import (
    F,
    X,
    DimensionMismatch,
    ExpressionSyntaxError,
    ExpressionTree,
    FunctionSymbol,
    GpParams,
    ProjectionModel,
    eval_node,
    parse_infix,
    project,
    ramped_half_and_half,
    random_tree,
    subtree_crossover,
    subtree_mutation,
    to_infix,
    validate_tree,
)

NAMES = [f"f{i}" for i in range(9)]


def tree(node):
    return ExpressionTree(node)


def test_function_set_and_arity():
    assert {s.value for s in FunctionSymbol} == {"add", "sub", "mul", "pdiv", "min", "max", "pow", "log"}
    for s in FunctionSymbol:
        assert s.arity == (1 if s is FunctionSymbol.LOG else 2)


@pytest.mark.parametrize(
    "node,row,expected",
    [
        (F("add", X(0), X(1)), [2, 3], 5.0),
        (F("sub", X(0), X(1)), [2, 3], -1.0),
        (F("mul", X(0), X(1)), [2, 3], 6.0),
        (F("pdiv", X(0), X(1)), [5, 0], 1.0),
        (F("pdiv", X(0), X(1)), [5, 2], 2.5),
        (F("pdiv", X(0), X(1)), [5, 1e-10], 1.0),
        (F("log", X(0)), [math.e], 1.0),
        (F("log", X(0)), [0.0], 0.0),
        (F("log", X(0)), [-math.e], 1.0),
        (F("min", X(0), X(1)), [2, 3], 2.0),
        (F("max", X(0), X(1)), [2, 3], 3.0),
        (F("pow", X(0), X(1)), [2, 3], 8.0),
        (F("pow", X(0), X(1)), [-2, 2], 4.0),
        (F("pow", X(0), X(1)), [0, 2], 0.0),
        (F("pow", X(0), X(1)), [0, 0], 1.0),
        (F("pow", X(0), X(1)), [0, -1], 1.0),
    ],
)
def test_protected_semantics(node, row, expected):
    assert eval_node(node, row) == pytest.approx(expected, rel=1e-12)


def test_overflow_is_replaced_and_clamped():
    big = F("pow", X(0), X(1))
    # exp overflow -> non-finite -> 0
    assert eval_node(big, [10.0, 1000.0]) == 0.0
    # 1e100 * 1e100 is finite but above the bound
    assert eval_node(F("mul", X(0), X(1)), [1e100, 1e100]) == 1e150
    assert eval_node(F("mul", X(0), X(1)), [-1e100, 1e100]) == -1e150


def test_project_shapes_and_examples():
    ident = ProjectionModel((tree(X(0)), tree(X(1))))
    np.testing.assert_array_equal(project(ident, np.array([[1.0, 2.0], [3.0, 4.0]])), [[1, 2], [3, 4]])
    m = ProjectionModel((tree(F("add", X(0), X(1))), tree(F("sub", X(0), X(1)))))
    np.testing.assert_array_equal(project(m, np.array([[3.0, 1.0]])), [[4.0, 2.0]])
    assert project(m, np.zeros((683, 9))).shape == (683, 2)


def test_project_dimension_mismatch():
    m = ProjectionModel((tree(X(5)), tree(X(0))))
    with pytest.raises(DimensionMismatch):
        project(m, np.zeros((3, 2)))


def test_model_total_size():
    m = ProjectionModel((tree(F("add", X(0), X(1))), tree(X(2))))
    assert m.total_size == 4
    assert m.target_dims == 2


def test_random_tree_depth_zero_and_full_depth_one():
    rng = np.random.default_rng(0)
    p0 = GpParams(n_features=3, max_depth_init=0, min_depth_init=0)
    t = random_tree(p0, rng, "grow")
    assert t.size == 1 and t.root.is_variable
    p1 = GpParams(n_features=3, max_depth_init=1, min_depth_init=1)
    for _ in range(50):
        t = random_tree(p1, rng, "full")
        if t.root.symbol.arity == 2:
            assert t.size == 3
        else:
            assert t.size == 2


def test_full_trees_put_variables_at_max_depth_only():
    rng = np.random.default_rng(1)
    p = GpParams(n_features=4, max_depth_init=3)

    def leaf_depths(n, d=0):
        if n.is_variable:
            return [d]
        return [x for c in n.children for x in leaf_depths(c, d + 1)]

    for _ in range(200):
        t = random_tree(p, rng, "full")
        assert set(leaf_depths(t.root)) == {3}


def test_grow_sample_respects_bounds():
    rng = np.random.default_rng(2)
    p = GpParams(n_features=9, max_depth_init=4)
    seen = set()
    for _ in range(10000):
        t = random_tree(p, rng, "grow")
        assert t.depth <= 4
        vs = t.variables()
        assert all(0 <= v < 9 for v in vs)
        seen |= vs
    assert seen == set(range(9))


def test_ramped_population_shape():
    rng = np.random.default_rng(3)
    p = GpParams(n_features=5, max_depth_init=5, min_depth_init=2)
    pop = ramped_half_and_half(p, 40, rng)
    assert len(pop) == 40
    for m in pop:
        assert m.target_dims == 2
        for t in m.trees:
            validate_tree(t, 5, 5)
    depths = {t.depth for m in pop for t in m.trees if t.root.symbol is not None}
    assert max(depths) == 5


def test_crossover_of_single_nodes_swaps():
    rng = np.random.default_rng(0)
    a, b = tree(X(0)), tree(X(1))
    c1, c2 = subtree_crossover(a, b, rng)
    assert c1.root == X(1) and c2.root == X(0)


def test_crossover_respects_depth_and_preserves_parents():
    rng = np.random.default_rng(4)
    p = GpParams(n_features=6, max_depth_init=6, max_depth=8)
    for _ in range(1000):
        a = random_tree(p, rng, "full" if rng.random() < 0.5 else "grow")
        b = random_tree(p, rng, "full")
        a_text, b_text = to_infix(a, NAMES), to_infix(b, NAMES)
        c1, c2 = subtree_crossover(a, b, rng, max_depth=8)
        assert c1.depth <= 8 and c2.depth <= 8
        validate_tree(c1, 6, 8)
        validate_tree(c2, 6, 8)
        assert to_infix(a, NAMES) == a_text and to_infix(b, NAMES) == b_text


def test_mutation_of_size_one_tree():
    rng = np.random.default_rng(5)
    p = GpParams(n_features=4)
    t = subtree_mutation(tree(X(0)), p, rng)
    assert t.depth <= p.mutation_depth
    validate_tree(t, 4)


def test_mutation_keeps_depth_limit():
    rng = np.random.default_rng(6)
    p = GpParams(n_features=5, max_depth_init=8, max_depth=8)
    base = random_tree(p, rng, "full")
    assert base.depth == 8
    before = to_infix(base, NAMES)
    for _ in range(1000):
        m = subtree_mutation(base, p, rng)
        assert m.depth <= 8
        validate_tree(m, 5, 8)
    assert to_infix(base, NAMES) == before


def test_caches_consistent_after_many_variations():
    rng = np.random.default_rng(7)
    p = GpParams(n_features=4, max_depth=10)
    pool = [random_tree(p, rng, "grow") for _ in range(20)]
    for _ in range(500):
        i, j = rng.integers(len(pool), size=2)
        if rng.random() < 0.5:
            pool[i], pool[j] = subtree_crossover(pool[i], pool[j], rng, p.max_depth)
        else:
            pool[i] = subtree_mutation(pool[i], p, rng)
    for t in pool:
        validate_tree(t, 4, 10)


def test_determinism_of_generation_and_variation():
    def run(seed):
        rng = np.random.default_rng(seed)
        p = GpParams(n_features=5)
        ts = [random_tree(p, rng, "grow") for _ in range(30)]
        a, b = subtree_crossover(ts[0], ts[1], rng)
        c = subtree_mutation(ts[2], p, rng)
        return [to_infix(t, NAMES) for t in ts + [a, b, c]]

    assert run(11) == run(11)


def test_infix_rendering():
    names = ["a", "b"]
    assert to_infix(tree(F("add", X(0), X(1))), names) == "(a + b)"
    assert to_infix(tree(F("pdiv", X(0), X(1))), names) == "pdiv(a, b)"
    assert to_infix(tree(F("log", F("pow", X(1), X(0)))), names) == "log(pow(b, a))"
    assert to_infix(tree(F("min", X(0), F("max", X(1), X(0)))), names) == "min(a, max(b, a))"


def test_infix_round_trip_random_trees():
    rng = np.random.default_rng(8)
    p = GpParams(n_features=9, max_depth_init=6)
    for _ in range(1000):
        t = random_tree(p, rng, "grow" if rng.random() < 0.5 else "full")
        text = to_infix(t, NAMES)
        back = parse_infix(text, NAMES)
        assert back.root == t.root
        assert back.size == t.size and back.depth == t.depth


@pytest.mark.parametrize("bad", ["(a +", "pdiv(a)", "foo(a, b)", "(a + b) c", "log(a, b)", "a $ b"])
def test_parse_errors(bad):
    with pytest.raises(ExpressionSyntaxError):
        parse_infix(bad, ["a", "b"])


def _random_row(rng, d):
    kind = rng.integers(4)
    if kind == 0:
        return rng.normal(size=d)
    if kind == 1:
        return rng.normal(size=d) * 10.0 ** rng.integers(-12, 100, size=d)
    if kind == 2:
        return rng.choice([0.0, 1e-10, -1e-10, 1.0, -1.0, 1e149], size=d)
    return rng.uniform(-1e6, 1e6, size=d)


def test_totality_fuzz():
    rng = np.random.default_rng(9)
    p = GpParams(n_features=6, max_depth_init=10, max_depth=10)
    rows = np.array([_random_row(rng, 6) for _ in range(100)])
    count = 0
    # 1000 trees x 100 rows = 1e5 pairs, evaluated column-wise
    from mog3p.gp_core import eval_columns

    for _ in range(1000):
        t = random_tree(p, rng, "grow" if rng.random() < 0.7 else "full", depth=int(rng.integers(0, 11)))
        out = eval_columns(t.root, rows)
        assert np.all(np.isfinite(out))
        assert np.all(np.abs(out) <= 1e150)
        count += out.size
    assert count == 100_000


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=3), st.integers(0, 2**32 - 1))
def test_eval_is_pure_and_matches_vectorized(row, seed):
    rng = np.random.default_rng(seed)
    t = random_tree(GpParams(n_features=3, max_depth_init=5), rng, "grow")
    a = eval_node(t.root, row)
    b = eval_node(t.root, row)
    assert math.isfinite(a)
    assert a == b
    from mog3p.gp_core import eval_columns

    col = eval_columns(t.root, np.array([row, row]))
    assert col[0] == a
