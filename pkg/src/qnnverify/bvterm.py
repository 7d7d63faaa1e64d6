"""Bit-vector term language, SMT-LIB v2 emission, and a concrete evaluator.

Terms are immutable trees with explicit widths; references to named
definitions (`ref`) make the overall script a DAG while keeping each
definition body a plain tree. Width discipline is enforced at construction so
malformed SMT never reaches the solver.

The evaluator implements SMT-LIB QF_BV semantics exactly (values are unsigned
residues mod 2**width; signed operators decode two's complement). It exists so
scripts can be checked against the interpreter without a solver in the loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EncodingError

_CMP_OPS = {"bvult", "bvule", "bvugt", "bvuge", "bvslt", "bvsle", "bvsgt", "bvsge"}
_SIGNED_CMP = {"bvslt", "bvsle", "bvsgt", "bvsge"}
_BITWISE = {"bvand", "bvor", "bvxor"}


@dataclass(frozen=True)
class BvTerm:
    """One node: bit-vector valued when width >= 1, boolean when width == 0."""

    kind: str
    width: int
    args: tuple["BvTerm", ...] = ()
    attrs: tuple = ()

    @property
    def is_bool(self) -> bool:
        return self.width == 0


def _expect_bv(t: BvTerm, what: str) -> None:
    if t.is_bool:
        raise EncodingError(f"{what} needs a bit-vector operand")


def _expect_same_width(a: BvTerm, b: BvTerm, what: str) -> None:
    _expect_bv(a, what)
    _expect_bv(b, what)
    if a.width != b.width:
        raise EncodingError(f"{what} width mismatch: {a.width} vs {b.width}")


def bv_const(width: int, value: int) -> BvTerm:
    """Constant; `value` may be negative (stored as two's complement)."""
    if width < 1:
        raise EncodingError(f"constant width must be >= 1, got {width}")
    return BvTerm("const", width, attrs=(value % (1 << width),))


def bv_var(name: str, width: int) -> BvTerm:
    return BvTerm("var", width, attrs=(name,))


def bv_ref(name: str, width: int) -> BvTerm:
    """Reference to a named definition (or declared variable)."""
    return BvTerm("ref", width, attrs=(name,))


def bv_add(a: BvTerm, b: BvTerm) -> BvTerm:
    _expect_same_width(a, b, "bvadd")
    return BvTerm("add", a.width, (a, b))


def bv_mul(a: BvTerm, b: BvTerm) -> BvTerm:
    _expect_same_width(a, b, "bvmul")
    return BvTerm("mul", a.width, (a, b))


def bv_neg(a: BvTerm) -> BvTerm:
    _expect_bv(a, "bvneg")
    return BvTerm("neg", a.width, (a,))


def _shift(kind: str, a: BvTerm, amount: int) -> BvTerm:
    _expect_bv(a, kind)
    if amount < 0:
        raise EncodingError(f"{kind} amount must be non-negative")
    # Amounts at or beyond the width saturate; every amount < width is
    # representable in the width itself, so clamping keeps semantics exact.
    return BvTerm(kind, a.width, (a,), attrs=(min(amount, a.width),))


def bv_shl(a: BvTerm, amount: int) -> BvTerm:
    return _shift("shl", a, amount)


def bv_ashr(a: BvTerm, amount: int) -> BvTerm:
    return _shift("ashr", a, amount)


def bv_sext(a: BvTerm, width: int) -> BvTerm:
    _expect_bv(a, "sign_extend")
    if width < a.width:
        raise EncodingError(f"sign_extend target {width} below operand width {a.width}")
    if width == a.width:
        return a
    return BvTerm("sext", width, (a,))


def bv_zext(a: BvTerm, width: int) -> BvTerm:
    _expect_bv(a, "zero_extend")
    if width < a.width:
        raise EncodingError(f"zero_extend target {width} below operand width {a.width}")
    if width == a.width:
        return a
    return BvTerm("zext", width, (a,))


def bv_extract(a: BvTerm, hi: int, lo: int) -> BvTerm:
    _expect_bv(a, "extract")
    if not (0 <= lo <= hi < a.width):
        raise EncodingError(f"extract [{hi}:{lo}] out of range for width {a.width}")
    return BvTerm("extract", hi - lo + 1, (a,), attrs=(hi, lo))


def bv_ite(cond: BvTerm, then: BvTerm, other: BvTerm) -> BvTerm:
    if not cond.is_bool:
        raise EncodingError("ite condition must be boolean")
    _expect_same_width(then, other, "ite")
    return BvTerm("ite", then.width, (cond, then, other))


def bv_cmp(op: str, a: BvTerm, b: BvTerm) -> BvTerm:
    if op not in _CMP_OPS:
        raise EncodingError(f"unknown comparison {op}")
    _expect_same_width(a, b, op)
    return BvTerm("cmp", 0, (a, b), attrs=(op,))


def bv_eq(a: BvTerm, b: BvTerm) -> BvTerm:
    _expect_same_width(a, b, "=")
    return BvTerm("eq", 0, (a, b))


def bool_const(value: bool) -> BvTerm:
    return BvTerm("boolconst", 0, attrs=(bool(value),))


def bool_not(a: BvTerm) -> BvTerm:
    if not a.is_bool:
        raise EncodingError("not needs a boolean operand")
    return BvTerm("not", 0, (a,))


def _bool_nary(kind: str, args: list[BvTerm]) -> BvTerm:
    for a in args:
        if not a.is_bool:
            raise EncodingError(f"{kind} needs boolean operands")
    if not args:
        return bool_const(kind == "and")
    if len(args) == 1:
        return args[0]
    return BvTerm(kind, 0, tuple(args))


def bool_and(args: list[BvTerm]) -> BvTerm:
    return _bool_nary("and", args)


def bool_or(args: list[BvTerm]) -> BvTerm:
    return _bool_nary("or", args)


def bv_bitwise(op: str, a: BvTerm, b: BvTerm) -> BvTerm:
    if op not in _BITWISE:
        raise EncodingError(f"unknown bitwise op {op}")
    _expect_same_width(a, b, op)
    return BvTerm("bitwise", a.width, (a, b), attrs=(op,))


def bv_bitnot(a: BvTerm) -> BvTerm:
    _expect_bv(a, "bvnot")
    return BvTerm("bitnot", a.width, (a,))


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------


def _bits(value: int, width: int) -> str:
    return "#b" + format(value % (1 << width), f"0{width}b")


def render(term: BvTerm) -> str:
    k = term.kind
    if k == "const":
        return _bits(term.attrs[0], term.width)
    if k in ("var", "ref"):
        return term.attrs[0]
    if k == "add":
        return f"(bvadd {render(term.args[0])} {render(term.args[1])})"
    if k == "mul":
        return f"(bvmul {render(term.args[0])} {render(term.args[1])})"
    if k == "neg":
        return f"(bvneg {render(term.args[0])})"
    if k == "shl":
        return f"(bvshl {render(term.args[0])} {_bits(term.attrs[0], term.width)})"
    if k == "ashr":
        return f"(bvashr {render(term.args[0])} {_bits(term.attrs[0], term.width)})"
    if k == "sext":
        return f"((_ sign_extend {term.width - term.args[0].width}) {render(term.args[0])})"
    if k == "zext":
        return f"((_ zero_extend {term.width - term.args[0].width}) {render(term.args[0])})"
    if k == "extract":
        return f"((_ extract {term.attrs[0]} {term.attrs[1]}) {render(term.args[0])})"
    if k == "ite":
        return (
            f"(ite {render(term.args[0])} {render(term.args[1])} {render(term.args[2])})"
        )
    if k == "cmp":
        return f"({term.attrs[0]} {render(term.args[0])} {render(term.args[1])})"
    if k == "eq":
        return f"(= {render(term.args[0])} {render(term.args[1])})"
    if k == "boolconst":
        return "true" if term.attrs[0] else "false"
    if k == "not":
        return f"(not {render(term.args[0])})"
    if k in ("and", "or"):
        return f"({k} " + " ".join(render(a) for a in term.args) + ")"
    if k == "bitwise":
        return f"({term.attrs[0]} {render(term.args[0])} {render(term.args[1])})"
    if k == "bitnot":
        return f"(bvnot {render(term.args[0])})"
    raise EncodingError(f"unknown term kind {k}")


# --------------------------------------------------------------------------
# Concrete evaluation (SMT-LIB semantics)
# --------------------------------------------------------------------------


def to_signed(value: int, width: int) -> int:
    value %= 1 << width
    return value - (1 << width) if value >= (1 << (width - 1)) else value


def eval_term(term: BvTerm, env: dict):
    """Evaluate under `env` (name -> unsigned value). Returns int or bool."""
    k = term.kind
    if k == "const":
        return term.attrs[0]
    if k in ("var", "ref"):
        return env[term.attrs[0]] % (1 << term.width)
    if k == "add":
        return (eval_term(term.args[0], env) + eval_term(term.args[1], env)) % (1 << term.width)
    if k == "mul":
        return (eval_term(term.args[0], env) * eval_term(term.args[1], env)) % (1 << term.width)
    if k == "neg":
        return (-eval_term(term.args[0], env)) % (1 << term.width)
    if k == "shl":
        return (eval_term(term.args[0], env) << term.attrs[0]) % (1 << term.width)
    if k == "ashr":
        return (to_signed(eval_term(term.args[0], env), term.width) >> term.attrs[0]) % (
            1 << term.width
        )
    if k == "sext":
        return to_signed(eval_term(term.args[0], env), term.args[0].width) % (1 << term.width)
    if k == "zext":
        return eval_term(term.args[0], env)
    if k == "extract":
        hi, lo = term.attrs
        return (eval_term(term.args[0], env) >> lo) % (1 << (hi - lo + 1))
    if k == "ite":
        return (
            eval_term(term.args[1], env)
            if eval_term(term.args[0], env)
            else eval_term(term.args[2], env)
        )
    if k == "cmp":
        op = term.attrs[0]
        a, b = eval_term(term.args[0], env), eval_term(term.args[1], env)
        if op in _SIGNED_CMP:
            a, b = to_signed(a, term.args[0].width), to_signed(b, term.args[1].width)
        if op.endswith("lt"):
            return a < b
        if op.endswith("le"):
            return a <= b
        if op.endswith("gt"):
            return a > b
        return a >= b
    if k == "eq":
        return eval_term(term.args[0], env) == eval_term(term.args[1], env)
    if k == "boolconst":
        return term.attrs[0]
    if k == "not":
        return not eval_term(term.args[0], env)
    if k == "and":
        return all(eval_term(a, env) for a in term.args)
    if k == "or":
        return any(eval_term(a, env) for a in term.args)
    if k == "bitwise":
        op = term.attrs[0]
        a, b = eval_term(term.args[0], env), eval_term(term.args[1], env)
        if op == "bvand":
            return a & b
        if op == "bvor":
            return a | b
        return a ^ b
    if k == "bitnot":
        return eval_term(term.args[0], env) ^ ((1 << term.width) - 1)
    raise EncodingError(f"unknown term kind {k}")


# --------------------------------------------------------------------------
# Scripts
# --------------------------------------------------------------------------


@dataclass
class SmtScript:
    """An ordered QF_BV script: declarations, definitions, assertions."""

    declarations: list[tuple[str, int]] = field(default_factory=list)
    definitions: list[tuple[str, int, BvTerm]] = field(default_factory=list)
    assertions: list[BvTerm] = field(default_factory=list)
    symbol_map: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def declare(self, name: str, width: int) -> BvTerm:
        self._check_fresh(name)
        self.declarations.append((name, width))
        return bv_ref(name, width)

    def define(self, name: str, term: BvTerm) -> BvTerm:
        self._check_fresh(name)
        self.definitions.append((name, term.width, term))
        return bv_ref(name, term.width)

    def assert_(self, term: BvTerm) -> None:
        if not term.is_bool:
            raise EncodingError("assertions must be boolean")
        self.assertions.append(term)

    def _check_fresh(self, name: str) -> None:
        if any(n == name for n, _ in self.declarations) or any(
            n == name for n, _, _ in self.definitions
        ):
            raise EncodingError(f"duplicate symbol {name}")

    @property
    def input_names(self) -> list[str]:
        return [n for n, _ in self.declarations]


def emit_smtlib(script: SmtScript) -> str:
    lines = ["(set-option :produce-models true)", "(set-logic QF_BV)"]
    for name, width in script.declarations:
        lines.append(f"(declare-const {name} (_ BitVec {width}))")
    for name, width, term in script.definitions:
        sort = "Bool" if width == 0 else f"(_ BitVec {width})"
        lines.append(f"(define-fun {name} () {sort} {render(term)})")
    for term in script.assertions:
        lines.append(f"(assert {render(term)})")
    lines.append("(check-sat)")
    if script.input_names:
        lines.append("(get-value (" + " ".join(script.input_names) + "))")
    return "\n".join(lines) + "\n"


def eval_script(script: SmtScript, inputs: dict) -> bool:
    """True when every assertion holds under `inputs` (name -> unsigned int).

    Definitions are evaluated in order, mirroring the solver's view.
    """
    env = dict(inputs)
    for name, _, term in script.definitions:
        env[name] = eval_term(term, env)
    return all(eval_term(a, env) for a in script.assertions)
