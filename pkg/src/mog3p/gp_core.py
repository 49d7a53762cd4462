"""Expression trees for GP projections.

Trees are immutable: variation operators rebuild the path from the root to the
changed node and share every untouched subtree with the parent.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PROTECT_EPS = 1e-9
VALUE_BOUND = 1e150


class FunctionSymbol(enum.Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    PDIV = "pdiv"
    MIN = "min"
    MAX = "max"
    POW = "pow"
    LOG = "log"

    @property
    def arity(self) -> int:
        return 1 if self is FunctionSymbol.LOG else 2


FUNCTIONS = tuple(FunctionSymbol)
_INFIX = {FunctionSymbol.ADD: "+", FunctionSymbol.SUB: "-", FunctionSymbol.MUL: "*"}
_BY_INFIX = {v: k for k, v in _INFIX.items()}
_BY_CALL = {s.value: s for s in FUNCTIONS if s not in _INFIX}


@dataclass(frozen=True, eq=True)
class ExprNode:
    """A function application (``symbol`` set) or a feature variable (``var`` set)."""

    symbol: FunctionSymbol | None = None
    var: int | None = None
    children: tuple["ExprNode", ...] = ()
    size: int = field(default=1, compare=False)
    depth: int = field(default=0, compare=False)

    @staticmethod
    def variable(index: int) -> "ExprNode":
        if index < 0:
            raise ValueError(f"variable index must be >= 0, got {index}")
        return ExprNode(var=index)

    @staticmethod
    def function(symbol: FunctionSymbol, *children: "ExprNode") -> "ExprNode":
        if len(children) != symbol.arity:
            raise ValueError(f"{symbol.value} takes {symbol.arity} children, got {len(children)}")
        return ExprNode(
            symbol=symbol,
            children=tuple(children),
            size=1 + sum(c.size for c in children),
            depth=1 + max(c.depth for c in children),
        )

    @property
    def is_variable(self) -> bool:
        return self.symbol is None


def X(i: int) -> ExprNode:
    return ExprNode.variable(i)


def F(symbol: FunctionSymbol | str, *children: ExprNode) -> ExprNode:
    if isinstance(symbol, str):
        symbol = FunctionSymbol(symbol)
    return ExprNode.function(symbol, *children)


@dataclass(frozen=True)
class ExpressionTree:
    root: ExprNode

    @property
    def size(self) -> int:
        return self.root.size

    @property
    def depth(self) -> int:
        return self.root.depth

    def variables(self) -> set[int]:
        return {n.var for n in iter_nodes(self.root) if n.is_variable}

    def max_var(self) -> int:
        return max(self.variables())


@dataclass(frozen=True)
class ProjectionModel:
    trees: tuple[ExpressionTree, ...]

    def __post_init__(self):
        if len(self.trees) < 1:
            raise ValueError("a projection model needs at least one tree")

    @property
    def target_dims(self) -> int:
        return len(self.trees)

    @property
    def total_size(self) -> int:
        return sum(t.size for t in self.trees)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for t in self.trees:
            out |= t.variables()
        return out

    def replace(self, index: int, tree: ExpressionTree) -> "ProjectionModel":
        trees = list(self.trees)
        trees[index] = tree
        return ProjectionModel(tuple(trees))


@dataclass(frozen=True)
class GpParams:
    n_features: int
    max_depth_init: int = 5
    min_depth_init: int = 2
    max_depth: int = 12
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    target_dims: int = 2
    mutation_depth: int = 2

    def __post_init__(self):
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if not (0.0 <= self.crossover_rate <= 1.0 and 0.0 <= self.mutation_rate <= 1.0):
            raise ValueError("rates must lie in [0, 1]")
        if not 0 <= self.max_depth_init <= self.max_depth:
            raise ValueError("need 0 <= max_depth_init <= max_depth")
        if self.min_depth_init > self.max_depth_init:
            raise ValueError("min_depth_init exceeds max_depth_init")
        if self.target_dims < 1:
            raise ValueError("target_dims must be >= 1")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _sanitize(v: np.ndarray) -> np.ndarray:
    v = np.where(np.isfinite(v), v, 0.0)
    return np.clip(v, -VALUE_BOUND, VALUE_BOUND)


def _protected_pow(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    tiny = np.abs(a) < PROTECT_EPS
    safe_a = np.where(tiny, 1.0, np.abs(a))
    out = np.exp(b * np.log(safe_a))
    # |a| ~ 0: 0 for positive exponents, 1 otherwise
    return np.where(tiny, np.where(b > 0, 0.0, 1.0), out)


def _apply(symbol: FunctionSymbol, args: list[np.ndarray]) -> np.ndarray:
    if symbol is FunctionSymbol.ADD:
        return args[0] + args[1]
    if symbol is FunctionSymbol.SUB:
        return args[0] - args[1]
    if symbol is FunctionSymbol.MUL:
        return args[0] * args[1]
    if symbol is FunctionSymbol.PDIV:
        a, b = args
        tiny = np.abs(b) < PROTECT_EPS
        return np.where(tiny, 1.0, a / np.where(tiny, 1.0, b))
    if symbol is FunctionSymbol.MIN:
        return np.minimum(args[0], args[1])
    if symbol is FunctionSymbol.MAX:
        return np.maximum(args[0], args[1])
    if symbol is FunctionSymbol.POW:
        return _protected_pow(args[0], args[1])
    a = args[0]
    tiny = np.abs(a) < PROTECT_EPS
    return np.where(tiny, 0.0, np.log(np.where(tiny, 1.0, np.abs(a))))


def eval_columns(node: ExprNode, X: np.ndarray) -> np.ndarray:
    """Evaluate ``node`` on every row of ``X`` at once; returns a length-n vector."""
    if node.is_variable:
        return _sanitize(np.asarray(X[:, node.var], dtype=float))
    args = [eval_columns(c, X) for c in node.children]
    with np.errstate(all="ignore"):
        return _sanitize(_apply(node.symbol, args))


def eval_node(node: ExprNode, row: Sequence[float]) -> float:
    row = np.asarray(row, dtype=float).reshape(1, -1)
    return float(eval_columns(node, row)[0])


class DimensionMismatch(ValueError):
    pass


def project(model: ProjectionModel, X: np.ndarray) -> np.ndarray:
    """Map an n x d matrix to the n x T matrix of tree outputs."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("expected a 2-D feature matrix")
    need = max(t.max_var() for t in model.trees)
    if need >= X.shape[1]:
        raise DimensionMismatch(
            f"model uses feature index {need} but data has {X.shape[1]} features"
        )
    return np.column_stack([eval_columns(t.root, X) for t in model.trees])


# ---------------------------------------------------------------------------
# generation and variation
# ---------------------------------------------------------------------------


def iter_nodes(node: ExprNode):
    """Pre-order traversal."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children))


def _paths(node: ExprNode, prefix: tuple[int, ...] = ()) -> list[tuple[tuple[int, ...], ExprNode]]:
    out = [(prefix, node)]
    for i, c in enumerate(node.children):
        out.extend(_paths(c, prefix + (i,)))
    return out


def _replace_at(node: ExprNode, path: tuple[int, ...], new: ExprNode) -> ExprNode:
    if not path:
        return new
    kids = list(node.children)
    kids[path[0]] = _replace_at(kids[path[0]], path[1:], new)
    return ExprNode.function(node.symbol, *kids)


def _random_node(n_features: int, depth: int, full: bool, rng: np.random.Generator) -> ExprNode:
    if depth == 0:
        return X(int(rng.integers(n_features)))
    if not full:
        # grow: terminal with probability proportional to the terminal share
        n_choices = len(FUNCTIONS) + n_features
        pick = int(rng.integers(n_choices))
        if pick >= len(FUNCTIONS):
            return X(pick - len(FUNCTIONS))
        symbol = FUNCTIONS[pick]
    else:
        symbol = FUNCTIONS[int(rng.integers(len(FUNCTIONS)))]
    kids = [_random_node(n_features, depth - 1, full, rng) for _ in range(symbol.arity)]
    return ExprNode.function(symbol, *kids)


def random_tree(
    params: GpParams,
    rng: np.random.Generator,
    method: str = "grow",
    depth: int | None = None,
) -> ExpressionTree:
    """Grow or Full tree; ``depth`` defaults to ``params.max_depth_init``."""
    if method not in ("grow", "full"):
        raise ValueError(f"unknown method {method!r}")
    d = params.max_depth_init if depth is None else depth
    return ExpressionTree(_random_node(params.n_features, d, method == "full", rng))


def ramped_half_and_half(params: GpParams, count: int, rng: np.random.Generator) -> list[ProjectionModel]:
    """Initial population; depths cycle over min_depth_init..max_depth_init."""
    lo = min(params.min_depth_init, params.max_depth_init)
    depths = list(range(lo, params.max_depth_init + 1))
    models = []
    for i in range(count):
        trees = []
        for t in range(params.target_dims):
            k = i * params.target_dims + t
            depth = depths[(k // 2) % len(depths)]
            method = "full" if k % 2 == 0 else "grow"
            trees.append(random_tree(params, rng, method, depth))
        models.append(ProjectionModel(tuple(trees)))
    return models


def subtree_crossover(
    a: ExpressionTree, b: ExpressionTree, rng: np.random.Generator, max_depth: int = 12
) -> tuple[ExpressionTree, ExpressionTree]:
    pa = _paths(a.root)
    pb = _paths(b.root)
    path_a, sub_a = pa[int(rng.integers(len(pa)))]
    path_b, sub_b = pb[int(rng.integers(len(pb)))]
    c1 = ExpressionTree(_replace_at(a.root, path_a, sub_b))
    c2 = ExpressionTree(_replace_at(b.root, path_b, sub_a))
    if c1.depth > max_depth:
        c1 = a
    if c2.depth > max_depth:
        c2 = b
    return c1, c2


def subtree_mutation(a: ExpressionTree, params: GpParams, rng: np.random.Generator) -> ExpressionTree:
    paths = _paths(a.root)
    path, _ = paths[int(rng.integers(len(paths)))]
    room = params.max_depth - len(path)
    depth = min(params.mutation_depth, room)
    while True:
        fresh = _random_node(params.n_features, depth, False, rng)
        child = ExpressionTree(_replace_at(a.root, path, fresh))
        if child.depth <= params.max_depth:
            return child
        depth -= 1


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\Z")


def to_infix(tree: ExpressionTree | ExprNode, feature_names: Sequence[str]) -> str:
    node = tree.root if isinstance(tree, ExpressionTree) else tree
    return _infix(node, feature_names)


def _infix(node: ExprNode, names: Sequence[str]) -> str:
    if node.is_variable:
        return names[node.var]
    if node.symbol in _INFIX:
        left, right = (_infix(c, names) for c in node.children)
        return f"({left} {_INFIX[node.symbol]} {right})"
    return f"{node.symbol.value}({', '.join(_infix(c, names) for c in node.children)})"


def check_feature_names(names: Sequence[str]) -> None:
    for n in names:
        if not _NAME_RE.match(n) or n in _BY_CALL:
            raise ValueError(f"feature name {n!r} cannot be used in expressions")
    if len(set(names)) != len(names):
        raise ValueError("feature names must be unique")


class ExpressionSyntaxError(ValueError):
    pass


_TOKEN_RE = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_.]*)|(\d+)|([()+\-*,]))")


def _tokenize(text: str) -> list[str]:
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character at offset {pos} in {text!r}")
        tokens.append(m.group(m.lastindex))
        pos = m.end()
    return tokens


def parse_infix(text: str, feature_names: Sequence[str]) -> ExpressionTree:
    """Inverse of :func:`to_infix`."""
    index = {n: i for i, n in enumerate(feature_names)}
    tokens = _tokenize(text)
    pos = 0

    def expect(tok: str) -> None:
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != tok:
            got = tokens[pos] if pos < len(tokens) else "end of input"
            raise ExpressionSyntaxError(f"expected {tok!r}, got {got!r} in {text!r}")
        pos += 1

    def expr() -> ExprNode:
        nonlocal pos
        if pos >= len(tokens):
            raise ExpressionSyntaxError(f"unexpected end of {text!r}")
        tok = tokens[pos]
        if tok == "(":
            pos += 1
            left = expr()
            if pos >= len(tokens) or tokens[pos] not in _BY_INFIX:
                raise ExpressionSyntaxError(f"expected an operator in {text!r}")
            op = _BY_INFIX[tokens[pos]]
            pos += 1
            right = expr()
            expect(")")
            return ExprNode.function(op, left, right)
        if tok in _BY_CALL and pos + 1 < len(tokens) and tokens[pos + 1] == "(":
            symbol = _BY_CALL[tok]
            pos += 2
            kids = [expr()]
            for _ in range(symbol.arity - 1):
                expect(",")
                kids.append(expr())
            expect(")")
            return ExprNode.function(symbol, *kids)
        if tok in index:
            pos += 1
            return X(index[tok])
        raise ExpressionSyntaxError(f"unknown token {tok!r} in {text!r}")

    node = expr()
    if pos != len(tokens):
        raise ExpressionSyntaxError(f"trailing input after position {pos} in {text!r}")
    return ExpressionTree(node)


def validate_tree(tree: ExpressionTree, n_features: int | None = None, max_depth: int | None = None) -> None:
    """Raise AssertionError if cached size/depth or arities are inconsistent."""

    def walk(n: ExprNode) -> tuple[int, int]:
        if n.is_variable:
            assert not n.children and n.var is not None and n.var >= 0
            if n_features is not None:
                assert n.var < n_features
            assert n.size == 1 and n.depth == 0
            return 1, 0
        assert len(n.children) == n.symbol.arity
        sizes, depths = zip(*(walk(c) for c in n.children))
        size, depth = 1 + sum(sizes), 1 + max(depths)
        assert n.size == size and n.depth == depth
        return size, depth

    _, depth = walk(tree.root)
    if max_depth is not None:
        assert depth <= max_depth
