"""Quantified boolean formulas: QDIMACS parsing and a brute-force decider.

Formulas are prenex CNF. The matrix is kept as a small expression tree of
tuples: ("var", v), ("not", t), ("and", (t, ...)), ("or", (t, ...)),
("const", bool). Variables are the 1-based QDIMACS indices.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import QdimacsError

FORALL = "a"
EXISTS = "e"


@dataclass(frozen=True)
class QbfFormula:
    """Prenex formula: ordered (variable, quantifier) prefix plus matrix."""

    prefix: tuple[tuple[int, str], ...]
    matrix: tuple
    n_vars: int

    @property
    def universal_count(self) -> int:
        return sum(1 for _, q in self.prefix if q == FORALL)


def _matrix_vars(tree: tuple) -> set[int]:
    kind = tree[0]
    if kind == "var":
        return {tree[1]}
    if kind == "const":
        return set()
    if kind == "not":
        return _matrix_vars(tree[1])
    out: set[int] = set()
    for child in tree[1]:
        out |= _matrix_vars(child)
    return out


def parse_qdimacs(text: str) -> QbfFormula:
    """Parse prenex-CNF QDIMACS. Clause variables must be quantified."""
    n_vars: int | None = None
    prefix: list[tuple[int, str]] = []
    clauses: list[tuple] = []
    quantified: set[int] = set()
    pending: list[int] = []
    saw_clause = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if n_vars is not None:
                raise QdimacsError(f"line {lineno}: duplicate problem line")
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise QdimacsError(f"line {lineno}: malformed problem line {line!r}")
            try:
                n_vars = int(parts[2])
                int(parts[3])
            except ValueError as exc:
                raise QdimacsError(f"line {lineno}: malformed problem line {line!r}") from exc
            if n_vars < 0:
                raise QdimacsError(f"line {lineno}: negative variable count")
            continue
        if n_vars is None:
            raise QdimacsError(f"line {lineno}: content before problem line")
        if line[0] in (FORALL, EXISTS):
            if saw_clause or pending:
                raise QdimacsError(f"line {lineno}: quantifier block after clauses")
            q = line[0]
            try:
                items = [int(tok) for tok in line[1:].split()]
            except ValueError as exc:
                raise QdimacsError(f"line {lineno}: bad quantifier line") from exc
            if not items or items[-1] != 0:
                raise QdimacsError(f"line {lineno}: quantifier line must end with 0")
            for v in items[:-1]:
                if not (1 <= v <= n_vars):
                    raise QdimacsError(f"line {lineno}: variable {v} out of range")
                if v in quantified:
                    raise QdimacsError(f"line {lineno}: variable {v} quantified twice")
                quantified.add(v)
                prefix.append((v, q))
            continue
        # Clause tokens; a clause ends at 0 and may span lines.
        try:
            tokens = [int(tok) for tok in line.split()]
        except ValueError as exc:
            raise QdimacsError(f"line {lineno}: bad clause token") from exc
        for tok in tokens:
            if tok == 0:
                clauses.append(_clause_tree(pending, quantified, lineno))
                pending = []
                saw_clause = True
            else:
                pending.append(tok)

    if n_vars is None:
        raise QdimacsError("missing problem line")
    if pending:
        raise QdimacsError("unterminated clause at end of input")
    matrix: tuple = ("and", tuple(clauses)) if clauses else ("const", True)
    return QbfFormula(prefix=tuple(prefix), matrix=matrix, n_vars=n_vars)


def _clause_tree(literals: list[int], quantified: set[int], lineno: int) -> tuple:
    parts = []
    for lit in literals:
        v = abs(lit)
        if v not in quantified:
            raise QdimacsError(f"line {lineno}: unquantified variable {v} in clause")
        parts.append(("var", v) if lit > 0 else ("not", ("var", v)))
    return ("or", tuple(parts))


def eval_matrix(tree: tuple, assignment: dict[int, bool]) -> bool:
    kind = tree[0]
    if kind == "var":
        return assignment[tree[1]]
    if kind == "const":
        return tree[1]
    if kind == "not":
        return not eval_matrix(tree[1], assignment)
    if kind == "and":
        return all(eval_matrix(c, assignment) for c in tree[1])
    if kind == "or":
        return any(eval_matrix(c, assignment) for c in tree[1])
    raise QdimacsError(f"unknown matrix node {kind!r}")


def brute_force_qbf(qbf: QbfFormula, guard_vars: int = 20) -> bool:
    """Decide the formula by recursive quantifier expansion."""
    if len(qbf.prefix) > guard_vars:
        raise OverflowError(f"refusing brute force on {len(qbf.prefix)} variables")

    assignment: dict[int, bool] = {}

    def recurse(i: int) -> bool:
        if i == len(qbf.prefix):
            return eval_matrix(qbf.matrix, assignment)
        var, q = qbf.prefix[i]
        results = []
        for value in (False, True):
            assignment[var] = value
            results.append(recurse(i + 1))
        del assignment[var]
        return all(results) if q == FORALL else any(results)

    return recurse(0)
