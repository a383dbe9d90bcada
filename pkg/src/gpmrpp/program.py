"""Decision-tree navigation programs.

A program is a full binary tree: internal nodes are conditionals
(:class:`FunctionKind`) with a true and a false branch, leaves are
movement actions (:class:`TerminalKind`).  Programs are immutable; the
genetic operators build new trees and share untouched subtrees.

Text form is an s-expression::

    (if-robot-at-destination (stay) (move-toward-objective))
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Iterator, Union

import numpy as np

DEFAULT_MAX_DEPTH = 50


class FunctionKind(IntEnum):
    TwoRobotsOnEachOthersPath = 0
    NeighborIsSurrounded = 1
    RobotAtBranch = 2
    RobotAtDestination = 3
    RobotMovingToBranch = 4
    NeighborOnPathIsFree = 5
    RobotIsSolved = 6
    OnPathOfRobotInNetwork = 7
    RobotInNetworkMovingToBranch = 8

    @property
    def symbol(self) -> str:
        return _FUNCTION_SYMBOLS[self]


class TerminalKind(IntEnum):
    MoveTowardBranch = 0
    MoveToFreeNeighbor = 1
    MoveTowardObjective = 2
    Stay = 3

    @property
    def symbol(self) -> str:
        return _TERMINAL_SYMBOLS[self]


_FUNCTION_SYMBOLS = {
    FunctionKind.TwoRobotsOnEachOthersPath: "if-two-robots-on-each-others-path",
    FunctionKind.NeighborIsSurrounded: "if-neighbor-is-surrounded",
    FunctionKind.RobotAtBranch: "if-robot-at-branch",
    FunctionKind.RobotAtDestination: "if-robot-at-destination",
    FunctionKind.RobotMovingToBranch: "if-robot-moving-to-branch",
    FunctionKind.NeighborOnPathIsFree: "if-neighbor-on-path-is-free",
    FunctionKind.RobotIsSolved: "if-robot-is-solved",
    FunctionKind.OnPathOfRobotInNetwork: "if-on-path-of-robot-in-network",
    FunctionKind.RobotInNetworkMovingToBranch: "if-robot-in-network-moving-to-branch",
}
_TERMINAL_SYMBOLS = {
    TerminalKind.MoveTowardBranch: "move-toward-branch",
    TerminalKind.MoveToFreeNeighbor: "move-to-free-neighbor",
    TerminalKind.MoveTowardObjective: "move-toward-objective",
    TerminalKind.Stay: "stay",
}
_BY_SYMBOL = {**{s: k for k, s in _FUNCTION_SYMBOLS.items()}, **{s: k for k, s in _TERMINAL_SYMBOLS.items()}}

FUNCTIONS = tuple(FunctionKind)
TERMINALS = tuple(TerminalKind)
PRIMITIVES = FUNCTIONS + TERMINALS


@dataclass(frozen=True)
class Terminal:
    kind: TerminalKind


@dataclass(frozen=True)
class Function:
    kind: FunctionKind
    on_true: "Node"
    on_false: "Node"


Node = Union[Function, Terminal]


def node_depth(node: Node) -> int:
    if isinstance(node, Terminal):
        return 0
    return 1 + max(node_depth(node.on_true), node_depth(node.on_false))


def iter_nodes(node: Node, path: tuple = ()) -> Iterator[tuple[tuple, Node]]:
    """Pre-order walk yielding ``(path, node)``; a path is a tuple of 0 (true) / 1 (false) turns."""
    stack = [(path, node)]
    while stack:
        p, n = stack.pop()
        yield p, n
        if isinstance(n, Function):
            stack.append((p + (1,), n.on_false))
            stack.append((p + (0,), n.on_true))


def subtree_at(node: Node, path: tuple) -> Node:
    for turn in path:
        node = node.on_false if turn else node.on_true
    return node


def replace_at(node: Node, path: tuple, new: Node) -> Node:
    if not path:
        return new
    if path[0]:
        return Function(node.kind, node.on_true, replace_at(node.on_false, path[1:], new))
    return Function(node.kind, replace_at(node.on_true, path[1:], new), node.on_false)


@dataclass(frozen=True)
class Program:
    root: Node

    @cached_property
    def depth(self) -> int:
        return node_depth(self.root)

    @cached_property
    def size(self) -> int:
        return sum(1 for _ in iter_nodes(self.root))

    @cached_property
    def text(self) -> str:
        return serialize_program(self)

    @cached_property
    def flat(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pre-order arrays ``(opcode, true_child, false_child)`` for the episode kernel.

        Opcodes 0-8 are conditionals, 9-12 are actions; children are -1 at leaves.
        """
        codes, left, right = [], [], []

        def emit(n: Node) -> int:
            idx = len(codes)
            codes.append(0)
            left.append(-1)
            right.append(-1)
            if isinstance(n, Terminal):
                codes[idx] = len(FUNCTIONS) + int(n.kind)
            else:
                codes[idx] = int(n.kind)
                left[idx] = emit(n.on_true)
                right[idx] = emit(n.on_false)
            return idx

        emit(self.root)
        return (
            np.asarray(codes, dtype=np.int64),
            np.asarray(left, dtype=np.int64),
            np.asarray(right, dtype=np.int64),
        )

    def nodes(self) -> list[tuple[tuple, Node]]:
        return list(iter_nodes(self.root))

    def is_valid(self, max_depth: int = DEFAULT_MAX_DEPTH) -> bool:
        return 1 <= self.depth <= max_depth

    def __str__(self) -> str:
        return self.text


def depth(program: Program) -> int:
    return program.depth


# ---------------------------------------------------------------------------
# random generation


def grow_subtree(max_depth: int, rng: random.Random, function_root: bool = False, full: bool = False) -> Node:
    """Random subtree of depth <= ``max_depth``.

    Grow method: every node is drawn uniformly from functions and terminals.
    Full method (``full=True``): conditionals everywhere above ``max_depth``.
    Nodes at ``max_depth`` are always terminals; ``function_root`` forces a
    conditional at the top.
    """
    if max_depth <= 0:
        return Terminal(rng.choice(TERMINALS))
    pick = rng.choice(FUNCTIONS if function_root or full else PRIMITIVES)
    if isinstance(pick, TerminalKind):
        return Terminal(pick)
    return Function(
        pick,
        grow_subtree(max_depth - 1, rng, full=full),
        grow_subtree(max_depth - 1, rng, full=full),
    )


INIT_METHODS = ("grow", "full", "ramped")


def random_program(max_depth: int, rng: random.Random, method: str = "grow") -> Program:
    """Random program with a conditional root and depth in ``[1, max_depth]``.

    ``ramped`` picks a depth limit uniformly from ``1..max_depth`` and then
    grow or full with equal odds.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if method == "grow":
        return Program(grow_subtree(max_depth, rng, function_root=True))
    if method == "full":
        return Program(grow_subtree(max_depth, rng, full=True))
    if method == "ramped":
        limit = rng.randint(1, max_depth)
        return Program(grow_subtree(limit, rng, function_root=True, full=rng.random() < 0.5))
    raise ValueError(f"unknown init method {method!r}")


# ---------------------------------------------------------------------------
# text form


class ProgramParseError(ValueError):
    def __init__(self, reason: str, position: int, token: str = ""):
        self.reason = reason
        self.position = position
        self.token = token
        where = f"at offset {position}" + (f" near {token!r}" if token else "")
        super().__init__(f"{reason} ({where})")


def serialize_program(program: Program) -> str:
    parts: list[str] = []

    def emit(n: Node) -> None:
        if isinstance(n, Terminal):
            parts.append(f"({n.kind.symbol})")
            return
        parts.append(f"({n.kind.symbol} ")
        emit(n.on_true)
        parts.append(" ")
        emit(n.on_false)
        parts.append(")")

    emit(program.root)
    return "".join(parts)


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            tokens.append((c, i))
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append((text[i:j], i))
            i = j
    return tokens


def parse_program(text: str, max_depth: int = DEFAULT_MAX_DEPTH) -> Program:
    """Parse the s-expression form; ``#`` lines are comments."""
    body = "\n".join("" if ln.lstrip().startswith("#") else ln for ln in text.split("\n"))
    tokens = _tokenize(body)
    pos = 0

    def expect_open() -> int:
        nonlocal pos
        if pos >= len(tokens):
            raise ProgramParseError("unbalanced parentheses: unexpected end of input", len(body))
        tok, at = tokens[pos]
        if tok != "(":
            raise ProgramParseError("expected '('", at, tok)
        pos += 1
        return at

    def node(level: int) -> Node:
        nonlocal pos
        open_at = expect_open()
        if pos >= len(tokens):
            raise ProgramParseError("unbalanced parentheses: unexpected end of input", len(body))
        sym, at = tokens[pos]
        if sym in "()":
            raise ProgramParseError("expected a symbol after '('", at, sym)
        kind = _BY_SYMBOL.get(sym)
        if kind is None:
            raise ProgramParseError(f"unknown symbol {sym!r}", at, sym)
        pos += 1
        children = []
        while pos < len(tokens) and tokens[pos][0] == "(":
            if level + 1 > max_depth:
                raise ProgramParseError(f"depth exceeds maximum {max_depth}", tokens[pos][1], sym)
            children.append(node(level + 1))
        if pos >= len(tokens):
            raise ProgramParseError("unbalanced parentheses: missing ')'", open_at, sym)
        tok, close_at = tokens[pos]
        if tok != ")":
            raise ProgramParseError("unexpected token", close_at, tok)
        pos += 1
        if isinstance(kind, TerminalKind):
            if children:
                raise ProgramParseError(f"arity error: {sym} takes no children, got {len(children)}", at, sym)
            return Terminal(kind)
        if len(children) != 2:
            raise ProgramParseError(f"arity error: {sym} takes 2 children, got {len(children)}", at, sym)
        return Function(kind, children[0], children[1])

    root = node(0)
    if pos != len(tokens):
        tok, at = tokens[pos]
        raise ProgramParseError("unbalanced parentheses: trailing input", at, tok)
    if isinstance(root, Terminal):
        raise ProgramParseError("depth 0 violates minimum depth 1 (root must be a conditional)", 0, root.kind.symbol)
    return Program(root)
