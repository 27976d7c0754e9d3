"""Emit a tree as nested C-style conditionals, plus a tiny interpreter for that output.

The interpreter accepts exactly the subset the emitter produces::

    stmt   := "return" INT ";" | "if" "(" NAME "<=" NUMBER ")" block "else" block
    block  := "{" stmt "}"
"""

from __future__ import annotations

import re

from .tree import FEATURES, DecisionTree

INDENT = "  "


def codegen(tree: DecisionTree, names=FEATURES) -> str:
    out: list[str] = []

    def emit(k, level):
        pad = INDENT * level
        if tree.is_leaf(k):
            out.append(f"{pad}return {tree.value[k]};")
            return
        out.append(f"{pad}if ({names[tree.feature[k]]} <= {tree.threshold[k]!r}) {{")
        emit(tree.left[k], level + 1)
        out.append(f"{pad}}} else {{")
        emit(tree.right[k], level + 1)
        out.append(f"{pad}}}")

    emit(0, 0)
    return "\n".join(out) + "\n"


_TOKEN = re.compile(r"\s*(?:(<=)|([{}();])|([A-Za-z_][A-Za-z_0-9]*)|([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))")


class CodegenSyntaxError(ValueError):
    pass


def _tokenize(src: str) -> list[str]:
    toks, pos = [], 0
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise CodegenSyntaxError(f"unexpected character at offset {pos}: {src[pos]!r}")
        toks.append(next(g for g in m.groups() if g is not None))
        pos = m.end()
    return toks


def compile_source(src: str, names=FEATURES):
    """Parse emitted source into a nested tuple program."""
    toks = _tokenize(src)
    pos = 0
    index = {n: i for i, n in enumerate(names)}

    def expect(tok):
        nonlocal pos
        if pos >= len(toks) or toks[pos] != tok:
            got = toks[pos] if pos < len(toks) else "EOF"
            raise CodegenSyntaxError(f"expected {tok!r}, got {got!r}")
        pos += 1

    def stmt():
        nonlocal pos
        if pos >= len(toks):
            raise CodegenSyntaxError("unexpected EOF")
        t = toks[pos]
        if t == "return":
            pos += 1
            val = int(toks[pos])
            pos += 1
            expect(";")
            return ("ret", val)
        if t == "if":
            pos += 1
            expect("(")
            name = toks[pos]
            if name not in index:
                raise CodegenSyntaxError(f"unknown input {name!r}")
            pos += 1
            expect("<=")
            thr = float(toks[pos])
            pos += 1
            expect(")")
            expect("{")
            a = stmt()
            expect("}")
            expect("else")
            expect("{")
            b = stmt()
            expect("}")
            return ("if", index[name], thr, a, b)
        raise CodegenSyntaxError(f"unexpected token {t!r}")

    prog = stmt()
    if pos != len(toks):
        raise CodegenSyntaxError(f"trailing tokens after program: {toks[pos:pos + 3]}")
    return prog


def interpret(prog, x) -> int:
    while prog[0] == "if":
        _, f, thr, a, b = prog
        prog = a if x[f] <= thr else b
    return prog[1]
