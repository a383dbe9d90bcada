import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from conftest import random_programs
from gpmrpp.program import (
    FUNCTIONS,
    TERMINALS,
    Function,
    FunctionKind as F,
    Program,
    ProgramParseError,
    Terminal,
    TerminalKind as T,
    depth,
    iter_nodes,
    parse_program,
    random_program,
    replace_at,
    serialize_program,
    subtree_at,
)


def fn(kind, a, b):
    return Function(kind, a, b)


def leaf(kind):
    return Terminal(kind)


def test_closed_vocabularies():
    assert len(FUNCTIONS) == 9 and len(TERMINALS) == 4


def test_depth_examples():
    assert depth(Program(fn(F.RobotIsSolved, leaf(T.Stay), leaf(T.Stay)))) == 1
    nested = fn(F.RobotAtBranch, fn(F.RobotIsSolved, leaf(T.Stay), leaf(T.Stay)), leaf(T.Stay))
    assert depth(Program(nested)) == 2
    assert not Program(leaf(T.Stay)).is_valid()


def test_serialize_example():
    p = Program(fn(F.RobotAtDestination, leaf(T.Stay), leaf(T.MoveTowardObjective)))
    assert serialize_program(p) == "(if-robot-at-destination (stay) (move-toward-objective))"


def test_every_symbol_round_trips():
    for k in FUNCTIONS:
        p = Program(fn(k, leaf(T.Stay), leaf(T.MoveToFreeNeighbor)))
        assert parse_program(p.text) == p
    for k in TERMINALS:
        p = Program(fn(F.RobotIsSolved, leaf(k), leaf(k)))
        assert parse_program(p.text) == p


def test_parse_tolerates_whitespace_and_comments():
    text = "# evolved\n(  if-robot-is-solved\n\t(stay)   (move-toward-objective) )\n"
    assert parse_program(text).text == "(if-robot-is-solved (stay) (move-toward-objective))"


@pytest.mark.parametrize(
    "text, reason",
    [
        ("(stay)", "depth 0 violates minimum depth 1"),
        ("(if-robot-at-branch (stay))", "arity"),
        ("(stay (stay))", "arity"),
        ("(if-robot-at-branch (stay) (stay) (stay))", "arity"),
        ("(if-robot-is-flying (stay) (stay))", "unknown symbol"),
        ("(if-robot-is-solved (stay) (stay)", "unbalanced"),
        ("(if-robot-is-solved (stay) (stay)))", "unbalanced"),
        ("", "unbalanced"),
        ("stay", r"expected '\('"),
        ("(if-robot-is-solved (stay) oops)", "unexpected token"),
    ],
)
def test_parse_errors(text, reason):
    with pytest.raises(ProgramParseError, match=reason):
        parse_program(text)


def test_parse_error_names_token_and_position():
    with pytest.raises(ProgramParseError) as info:
        parse_program("(if-robot-is-solved (stay) (jump))")
    assert info.value.token == "jump"
    assert info.value.position == 28
    assert "jump" in str(info.value)


def test_parse_depth_limit():
    deep = "(if-robot-is-solved " * 3 + "(stay)" + " (stay))" * 3
    assert parse_program(deep, max_depth=3).depth == 3
    with pytest.raises(ProgramParseError, match="exceeds maximum"):
        parse_program(deep, max_depth=2)


def test_random_program_depth_one():
    for seed in range(50):
        p = random_program(1, random.Random(seed))
        assert isinstance(p.root, Function)
        assert isinstance(p.root.on_true, Terminal) and isinstance(p.root.on_false, Terminal)


def test_random_program_covers_vocabulary():
    rng = random.Random(0)
    seen = set()
    for _ in range(10000):
        seen.update(type(n).__name__ + str(int(n.kind)) for _, n in iter_nodes(random_program(2, rng).root))
    assert len(seen) == 13


@pytest.mark.parametrize("method", ["grow", "full", "ramped"])
@given(seed=st.integers(0, 2**32), max_depth=st.integers(1, 6))
def test_random_program_bounds(method, seed, max_depth):
    p = random_program(max_depth, random.Random(seed), method)
    assert 1 <= p.depth <= max_depth
    if method == "full":
        assert p.depth == max_depth


@given(random_programs(max_depth=6))
def test_round_trip_and_full_binary_shape(p):
    assert parse_program(serialize_program(p)) == p
    kinds = Counter(type(n) for _, n in iter_nodes(p.root))
    assert kinds[Terminal] == kinds[Function] + 1
    assert p.size == kinds[Terminal] + kinds[Function]


@given(random_programs(), random_programs())
def test_serialize_injective(a, b):
    assert (a.text == b.text) == (a == b)


@given(random_programs())
def test_flat_encoding_matches_tree(p):
    codes, left, right = p.flat
    assert len(codes) == p.size

    def check(i, node):
        if isinstance(node, Terminal):
            assert codes[i] == 9 + int(node.kind) and left[i] == right[i] == -1
        else:
            assert codes[i] == int(node.kind)
            check(left[i], node.on_true)
            check(right[i], node.on_false)

    check(0, p.root)


@given(random_programs(), st.data())
def test_replace_at_and_subtree_at(p, data):
    nodes = p.nodes()
    path, sub = nodes[data.draw(st.integers(0, len(nodes) - 1))]
    assert subtree_at(p.root, path) is sub
    new = leaf(T.Stay)
    replaced = replace_at(p.root, path, new)
    assert subtree_at(replaced, path) == new
    assert subtree_at(p.root, path) is sub
