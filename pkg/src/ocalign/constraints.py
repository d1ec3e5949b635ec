"""Guard language: typed AST, parser, evaluator, aggregators, SMT lowering.

The surface syntax uses ``&&  ||  !  ==  !=  <  <=  >  >=  +  -`` with integer
literals (``5``), exact rational literals (``5/2`` or ``2.5``), double-quoted
strings, variables, uninterpreted function application (``cost(P)``), and the
aggregators ``sum  min  max  mean`` over list terms.  Derived operators are
desugared at parse time into the core forms (conjunction, negation, ``>=``,
``>``, and non-arithmetic equality), so printing always yields core syntax and
``parse(print(e))`` is structurally ``e``.

Rationals are exact (:class:`fractions.Fraction`); strings, finite-set
elements, and object ids lower to integer codes supplied by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from .values import BOOL, FinElem, INT, ListT, RAT, STRING, TypeName, Value, is_numeric

AGGREGATORS = ("sum", "min", "max", "mean")


class GuardSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"at column {position}: {message}")
        self.position = position


class GuardTypeError(TypeError):
    pass


class GuardEvalError(RuntimeError):
    pass


class MissingInterpretationError(GuardEvalError):
    """A function symbol was queried outside its interpretation table."""


class EmptyAggregationError(GuardEvalError):
    """min/max/mean over an empty list; guards fail closed on this."""


# ---------------------------------------------------------------------------
# Signatures and interpretations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionSig:
    args: tuple[str, ...]
    result: str


@dataclass
class FunctionTable:
    """Finite interpretation: explicit points plus an optional default."""

    entries: dict[tuple, Value] = field(default_factory=dict)
    default: Optional[Value] = None

    def lookup(self, name: str, args: tuple) -> Value:
        if args in self.entries:
            return self.entries[args]
        if self.default is not None:
            return self.default
        raise MissingInterpretationError(f"{name}{args!r} has no interpretation entry")


class Interpretations:
    """Background knowledge: the known function tables."""

    def __init__(self, tables: Optional[Mapping[str, FunctionTable]] = None):
        self.tables: dict[str, FunctionTable] = dict(tables or {})

    def apply(self, name: str, args: tuple) -> Value:
        table = self.tables.get(name)
        if table is None:
            raise MissingInterpretationError(f"function {name} has no interpretation")
        return table.lookup(name, args)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarRef:
    name: str
    type: str


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class RatLit:
    value: Fraction


@dataclass(frozen=True)
class StrLit:
    value: str
    type: str  # STRING or a finset type after coercion


@dataclass(frozen=True)
class Add:
    left: "Term"
    right: "Term"
    type: str


@dataclass(frozen=True)
class Neg:
    arg: "Term"
    type: str


@dataclass(frozen=True)
class FunApp:
    name: str
    args: tuple["Term", ...]
    type: str


@dataclass(frozen=True)
class Agg:
    op: str
    arg: "ListTerm"
    type: str


@dataclass(frozen=True)
class ListRef:
    name: str
    type: ListT


@dataclass(frozen=True)
class MapFun:
    """Component-wise application of a unary function over a list term."""

    name: str
    arg: "ListTerm"
    type: ListT


Term = Union[VarRef, IntLit, RatLit, StrLit, Add, Neg, FunApp, Agg]
ListTerm = Union[ListRef, MapFun]


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class BoolVar:
    name: str


@dataclass(frozen=True)
class Eq:
    """Equality over non-arithmetic terms (numeric == desugars to >= pairs)."""

    left: Term
    right: Term


@dataclass(frozen=True)
class Ge:
    left: Term
    right: Term


@dataclass(frozen=True)
class Gt:
    left: Term
    right: Term


@dataclass(frozen=True)
class RelApp:
    """Uninterpreted boolean-valued function used as a constraint atom."""

    name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class And:
    left: "Constraint"
    right: "Constraint"


@dataclass(frozen=True)
class Not:
    arg: "Constraint"


Constraint = Union[BoolLit, BoolVar, Eq, Ge, Gt, RelApp, And, Not]


def term_type(t: Union[Term, ListTerm]) -> TypeName:
    if isinstance(t, IntLit):
        return INT
    if isinstance(t, RatLit):
        return RAT
    return t.type


def is_arith(tname: TypeName) -> bool:
    return tname in (INT, RAT)


def free_variables(node) -> set:
    """Variable names (base names for lists) occurring in a constraint/term."""
    out: set = set()
    _collect_vars(node, out)
    return out


def _collect_vars(node, out: set) -> None:
    if isinstance(node, (VarRef, BoolVar, ListRef)):
        out.add(node.name)
    elif isinstance(node, (IntLit, RatLit, StrLit, BoolLit)):
        pass
    elif isinstance(node, (Add,)):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, (Neg, MapFun, Agg, Not)):
        _collect_vars(node.arg, out)
    elif isinstance(node, (FunApp, RelApp)):
        for a in node.args:
            _collect_vars(a, out)
    elif isinstance(node, (Eq, Ge, Gt, And)):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    else:
        raise TypeError(f"not an AST node: {node!r}")


def functions_used(node) -> set:
    out: set = set()
    _collect_funs(node, out)
    return out


def _collect_funs(node, out: set) -> None:
    if isinstance(node, (FunApp, RelApp)):
        out.add(node.name)
        for a in node.args:
            _collect_funs(a, out)
    elif isinstance(node, MapFun):
        out.add(node.name)
        _collect_funs(node.arg, out)
    elif isinstance(node, (Add, Eq, Ge, Gt, And)):
        _collect_funs(node.left, out)
        _collect_funs(node.right, out)
    elif isinstance(node, (Neg, Agg, Not)):
        _collect_funs(node.arg, out)


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


class GuardEnv:
    """Typing context for one transition's guard.

    ``variables`` maps every visible variable to its type (list variables to
    ``ListT``); ``functions`` holds uninterpreted signatures; ``universe`` is
    any object answering ``is_object_type`` / ``is_finset_type`` and exposing
    ``finset_domains``.
    """

    def __init__(
        self,
        variables: Mapping[str, TypeName],
        functions: Optional[Mapping[str, FunctionSig]] = None,
        universe=None,
    ):
        self.variables = dict(variables)
        self.functions = dict(functions or {})
        self.universe = universe

    def is_object_type(self, tname: str) -> bool:
        return self.universe is not None and self.universe.is_object_type(tname)

    def is_finset_type(self, tname: str) -> bool:
        return self.universe is not None and self.universe.is_finset_type(tname)

    def finset_domain(self, tname: str) -> Sequence[str]:
        return self.universe.finset_domains[tname]


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_PUNCT = ("&&", "||", "==", "!=", "<=", ">=", "(", ")", ",", "+", "-", "<", ">", "!")


def _tokenize(text: str):
    tokens = []  # (kind, value, position)
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise GuardSyntaxError("unterminated string literal", i + 1)
            tokens.append(("str", "".join(buf), i + 1))
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                k = j + 1
                while k < n and text[k].isdigit():
                    k += 1
                if k == j + 1:
                    raise GuardSyntaxError("digits expected after decimal point", j + 1)
                whole, frac = text[i:j], text[j + 1 : k]
                value = Fraction(int(whole + frac), 10 ** len(frac))
                tokens.append(("rat", value, i + 1))
                i = k
                continue
            if j < n and text[j] == "/" and j + 1 < n and text[j + 1].isdigit():
                k = j + 1
                while k < n and text[k].isdigit():
                    k += 1
                den = int(text[j + 1 : k])
                if den == 0:
                    raise GuardSyntaxError("zero denominator", j + 2)
                tokens.append(("rat", Fraction(int(text[i:j]), den), i + 1))
                i = k
                continue
            tokens.append(("int", int(text[i:j]), i + 1))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i + 1))
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(("punct", p, i + 1))
                i += len(p)
                break
        else:
            raise GuardSyntaxError(f"unexpected character {c!r}", i + 1)
    tokens.append(("eof", None, n + 1))
    return tokens


class _Backtrack(Exception):
    pass


class _Parser:
    def __init__(self, text: str, env: GuardEnv):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.env = env

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_punct(self, value: str):
        kind, v, p = self.next()
        if kind != "punct" or v != value:
            raise GuardSyntaxError(f"expected {value!r}", p)

    def at_punct(self, *values: str) -> bool:
        kind, v, _ = self.peek()
        return kind == "punct" and v in values

    # -- constraints --------------------------------------------------------

    def parse_constraint(self) -> Constraint:
        left = self.parse_conjunction()
        while self.at_punct("||"):
            self.next()
            right = self.parse_conjunction()
            left = Not(And(Not(left), Not(right)))
        return left

    def parse_conjunction(self) -> Constraint:
        left = self.parse_negation()
        while self.at_punct("&&"):
            self.next()
            left = And(left, self.parse_negation())
        return left

    def parse_negation(self) -> Constraint:
        if self.at_punct("!"):
            self.next()
            return Not(self.parse_negation())
        return self.parse_atom()

    def parse_atom(self) -> Constraint:
        save = self.pos
        try:
            return self.parse_comparison()
        except _Backtrack:
            self.pos = save
        if self.at_punct("("):
            self.next()
            inner = self.parse_constraint()
            self.expect_punct(")")
            return inner
        kind, v, p = self.next()
        if kind == "ident" and v in ("true", "false"):
            return BoolLit(v == "true")
        if kind == "ident":
            if self.at_punct("("):
                app = self.parse_application(v, p)
                if isinstance(app, RelApp):
                    return app
                raise GuardTypeError(
                    f"at column {p}: {v} returns {term_type(app)}, not a constraint"
                )
            vt = self.env.variables.get(v)
            if vt is None:
                raise GuardTypeError(f"at column {p}: unknown identifier {v!r}")
            if vt != BOOL:
                raise GuardTypeError(f"at column {p}: variable {v} of type {vt} is not a constraint")
            return BoolVar(v)
        raise GuardSyntaxError("constraint expected", p)

    def parse_comparison(self) -> Constraint:
        left = self.parse_term_probe()
        kind, op, p = self.peek()
        if kind != "punct" or op not in ("==", "!=", "<=", ">=", "<", ">"):
            raise _Backtrack()
        self.next()
        right = self.parse_term_probe()
        return self.typed_comparison(op, left, right, p)

    def typed_comparison(self, op: str, left: Term, right: Term, p: int) -> Constraint:
        lt, rt = term_type(left), term_type(right)
        if is_arith(lt) and is_arith(rt):
            if op == ">":
                return Gt(left, right)
            if op == ">=":
                return Ge(left, right)
            if op == "<":
                return Not(Ge(left, right))
            if op == "<=":
                return Not(Gt(left, right))
            if op == "==":
                return And(Ge(left, right), Ge(right, left))
            return Not(And(Ge(left, right), Ge(right, left)))
        if op not in ("==", "!="):
            raise GuardTypeError(f"at column {p}: ordering needs numeric operands, got {lt}/{rt}")
        left, right = self.coerce_pair(left, right, p)
        lt, rt = term_type(left), term_type(right)
        if lt != rt:
            raise GuardTypeError(f"at column {p}: cannot compare {lt} with {rt}")
        if lt == BOOL:
            raise GuardTypeError(f"at column {p}: use &&/||/! for booleans")
        return Eq(left, right) if op == "==" else Not(Eq(left, right))

    def coerce_pair(self, left: Term, right: Term, p: int):
        # A bare string literal takes a finset type when compared against one.
        lt, rt = term_type(left), term_type(right)
        if isinstance(left, StrLit) and lt == STRING and self.env.is_finset_type(rt):
            left = self.coerce_literal(left, rt, p)
        if isinstance(right, StrLit) and rt == STRING and self.env.is_finset_type(lt):
            right = self.coerce_literal(right, lt, p)
        return left, right

    def coerce_literal(self, lit: StrLit, tname: str, p: int) -> StrLit:
        if lit.value not in self.env.finset_domain(tname):
            raise GuardTypeError(f"at column {p}: {lit.value!r} not in domain of {tname}")
        return StrLit(lit.value, tname)

    # -- terms --------------------------------------------------------------

    def parse_term_probe(self) -> Term:
        # Inside the comparison probe, soft-fail on syntax errors so the
        # caller can re-parse the atom as a constraint.
        save = self.pos
        try:
            return self.parse_additive()
        except GuardSyntaxError:
            self.pos = save
            raise _Backtrack()

    def parse_additive(self) -> Term:
        left = self.parse_unary()
        while self.at_punct("+", "-"):
            _, op, p = self.next()
            right = self.parse_unary()
            if op == "-":
                right = self.typed_neg(right, p)
            left = self.typed_add(left, right, p)
        return left

    def typed_add(self, left: Term, right: Term, p: int) -> Term:
        lt, rt = term_type(left), term_type(right)
        if not (is_arith(lt) and is_arith(rt)):
            raise GuardTypeError(f"at column {p}: + needs numeric operands, got {lt}/{rt}")
        return Add(left, right, RAT if RAT in (lt, rt) else INT)

    def typed_neg(self, arg: Term, p: int) -> Term:
        at = term_type(arg)
        if not is_arith(at):
            raise GuardTypeError(f"at column {p}: - needs a numeric operand, got {at}")
        return Neg(arg, at)

    def parse_unary(self) -> Term:
        if self.at_punct("-"):
            _, _, p = self.next()
            return self.typed_neg(self.parse_unary(), p)
        return self.parse_primary()

    def parse_primary(self) -> Term:
        kind, v, p = self.next()
        if kind == "int":
            return IntLit(v)
        if kind == "rat":
            return RatLit(v)
        if kind == "str":
            return StrLit(v, STRING)
        if kind == "punct" and v == "(":
            inner = self.parse_additive()
            self.expect_punct(")")
            return inner
        if kind == "ident":
            if v in AGGREGATORS:
                return self.parse_aggregation(v, p)
            if self.at_punct("("):
                app = self.parse_application(v, p)
                if isinstance(app, RelApp):
                    raise GuardSyntaxError(f"{v} is boolean-valued, not a term", p)
                return app
            vt = self.env.variables.get(v)
            if vt is None:
                raise GuardTypeError(f"at column {p}: unknown identifier {v!r}")
            if isinstance(vt, ListT):
                raise GuardTypeError(
                    f"at column {p}: list variable {v} needs an aggregator or mapped function"
                )
            return VarRef(v, vt)
        raise GuardSyntaxError("term expected", p)

    def parse_aggregation(self, op: str, p: int) -> Term:
        self.expect_punct("(")
        arg = self.parse_list_term()
        self.expect_punct(")")
        et = arg.type.elem
        if not is_arith(et):
            raise GuardTypeError(f"at column {p}: {op} needs a numeric list, got [{et}]")
        if op == "mean" and et != RAT:
            raise GuardTypeError(f"at column {p}: mean is defined for rational lists only")
        return Agg(op, arg, et if op != "mean" else RAT)

    def parse_list_term(self) -> ListTerm:
        kind, v, p = self.next()
        if kind != "ident":
            raise GuardSyntaxError("list term expected", p)
        if self.at_punct("("):
            sig = self.env.functions.get(v)
            if sig is None:
                raise GuardTypeError(f"at column {p}: unknown function {v!r}")
            self.next()
            arg = self.parse_list_term()
            self.expect_punct(")")
            if len(sig.args) != 1:
                raise GuardTypeError(f"at column {p}: {v} mapped over a list must be unary")
            if sig.args[0] != arg.type.elem:
                raise GuardTypeError(
                    f"at column {p}: {v} expects {sig.args[0]}, list has [{arg.type.elem}]"
                )
            if sig.result == BOOL:
                raise GuardTypeError(f"at column {p}: boolean-valued {v} cannot map over a list")
            return MapFun(v, arg, ListT(sig.result))
        vt = self.env.variables.get(v)
        if vt is None:
            raise GuardTypeError(f"at column {p}: unknown identifier {v!r}")
        if not isinstance(vt, ListT):
            raise GuardTypeError(f"at column {p}: {v} is not a list variable")
        return ListRef(v, vt)

    def parse_application(self, name: str, p: int):
        sig = self.env.functions.get(name)
        if sig is None:
            raise GuardTypeError(f"at column {p}: unknown function {name!r}")
        self.expect_punct("(")
        args = []
        if not self.at_punct(")"):
            args.append(self.parse_argument())
            while self.at_punct(","):
                self.next()
                args.append(self.parse_argument())
        self.expect_punct(")")
        if len(args) == 1 and isinstance(args[0], (ListRef, MapFun)):
            # component-wise application; re-route through the list rules
            arg = args[0]
            if len(sig.args) != 1 or sig.args[0] != arg.type.elem:
                raise GuardTypeError(
                    f"at column {p}: {name} cannot map over a list of [{arg.type.elem}]"
                )
            if sig.result == BOOL:
                raise GuardTypeError(f"at column {p}: boolean-valued {name} cannot map over a list")
            return MapFun(name, arg, ListT(sig.result))
        if len(args) != len(sig.args):
            raise GuardTypeError(
                f"at column {p}: {name} expects {len(sig.args)} arguments, got {len(args)}"
            )
        coerced = []
        for want, got in zip(sig.args, args):
            if isinstance(got, (ListRef, MapFun)):
                raise GuardTypeError(f"at column {p}: {name} takes scalars, got a list")
            gt = term_type(got)
            if isinstance(got, StrLit) and gt == STRING and self.env.is_finset_type(want):
                got = self.coerce_literal(got, want, p)
                gt = want
            if gt != want and not (is_arith(gt) and is_arith(want) and want == RAT):
                raise GuardTypeError(f"at column {p}: {name} argument wants {want}, got {gt}")
            coerced.append(got)
        if sig.result == BOOL:
            return RelApp(name, tuple(coerced))
        return FunApp(name, tuple(coerced), sig.result)

    def parse_argument(self):
        kind, v, _ = self.peek()
        if kind == "ident" and isinstance(self.env.variables.get(v), ListT):
            return self.parse_list_term()
        if kind == "ident" and v in self.env.functions and self.tokens[self.pos + 1][1] == "(":
            save = self.pos
            try:
                return self.parse_list_term()
            except (GuardTypeError, GuardSyntaxError):
                self.pos = save
        return self.parse_additive()


def parse_constraint(text: str, env: GuardEnv) -> Constraint:
    parser = _Parser(text, env)
    expr = parser.parse_constraint()
    kind, _, p = parser.peek()
    if kind != "eof":
        raise GuardSyntaxError("trailing input after constraint", p)
    return expr


# ---------------------------------------------------------------------------
# Printer (core syntax only)
# ---------------------------------------------------------------------------


def print_constraint(c: Constraint) -> str:
    if isinstance(c, BoolLit):
        return "true" if c.value else "false"
    if isinstance(c, BoolVar):
        return c.name
    if isinstance(c, Eq):
        return f"{print_term(c.left)} == {print_term(c.right)}"
    if isinstance(c, Ge):
        return f"{print_term(c.left)} >= {print_term(c.right)}"
    if isinstance(c, Gt):
        return f"{print_term(c.left)} > {print_term(c.right)}"
    if isinstance(c, RelApp):
        return f"{c.name}({', '.join(print_term(a) for a in c.args)})"
    if isinstance(c, And):
        return f"{_paren(c.left)} && {_paren(c.right)}"
    if isinstance(c, Not):
        return f"!{_paren(c.arg)}"
    raise TypeError(f"not a constraint: {c!r}")


def _paren(c: Constraint) -> str:
    text = print_constraint(c)
    if isinstance(c, (BoolLit, BoolVar, RelApp)):
        return text
    return f"({text})"


def print_term(t: Union[Term, ListTerm]) -> str:
    if isinstance(t, VarRef) or isinstance(t, ListRef):
        return t.name
    if isinstance(t, IntLit):
        return str(t.value)
    if isinstance(t, RatLit):
        return f"{t.value.numerator}/{t.value.denominator}"
    if isinstance(t, StrLit):
        escaped = t.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(t, Add):
        return f"({print_term(t.left)} + {print_term(t.right)})"
    if isinstance(t, Neg):
        return f"-({print_term(t.arg)})"
    if isinstance(t, (FunApp, RelApp)):
        return f"{t.name}({', '.join(print_term(a) for a in t.args)})"
    if isinstance(t, Agg):
        return f"{t.op}({print_term(t.arg)})"
    if isinstance(t, MapFun):
        return f"{t.name}({print_term(t.arg)})"
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def aggregate(op: str, values: Sequence[Value]) -> Value:
    """Exact aggregation; sum([]) is 0, the others reject empty input."""
    if op not in AGGREGATORS:
        raise GuardEvalError(f"unknown aggregator {op!r}")
    for v in values:
        if not is_numeric(v):
            raise GuardEvalError(f"{op} over non-numeric element {v!r}")
    if op == "sum":
        total: Value = 0
        for v in values:
            total = total + v
        return total
    if not values:
        raise EmptyAggregationError(f"{op} over an empty list")
    if op == "min":
        return min(values)
    if op == "max":
        return max(values)
    if any(not isinstance(v, Fraction) for v in values):
        raise GuardEvalError("mean is defined for rational lists only")
    return sum(values, Fraction(0)) / len(values)


def evaluate(expr: Constraint, binding: Mapping[str, Value], interp: Optional[Interpretations] = None) -> bool:
    """Ground truth value of a constraint; evaluation is eager, so an empty
    min/max/mean anywhere raises :class:`EmptyAggregationError`."""
    interp = interp or Interpretations()
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, BoolVar):
        v = _lookup(binding, expr.name)
        if not isinstance(v, bool):
            raise GuardEvalError(f"{expr.name} bound to non-boolean {v!r}")
        return v
    if isinstance(expr, And):
        left = evaluate(expr.left, binding, interp)
        right = evaluate(expr.right, binding, interp)
        return left and right
    if isinstance(expr, Not):
        return not evaluate(expr.arg, binding, interp)
    if isinstance(expr, Eq):
        lv = eval_term(expr.left, binding, interp)
        rv = eval_term(expr.right, binding, interp)
        return lv == rv
    if isinstance(expr, (Ge, Gt)):
        lv = eval_term(expr.left, binding, interp)
        rv = eval_term(expr.right, binding, interp)
        if not (is_numeric(lv) and is_numeric(rv)):
            raise GuardEvalError(f"ordering over non-numeric values {lv!r}, {rv!r}")
        return lv >= rv if isinstance(expr, Ge) else lv > rv
    if isinstance(expr, RelApp):
        args = tuple(eval_term(a, binding, interp) for a in expr.args)
        v = interp.apply(expr.name, args)
        if not isinstance(v, bool):
            raise GuardEvalError(f"relation {expr.name} returned non-boolean {v!r}")
        return v
    raise TypeError(f"not a constraint: {expr!r}")


def eval_term(t: Term, binding: Mapping[str, Value], interp: Interpretations) -> Value:
    if isinstance(t, VarRef):
        return _lookup(binding, t.name)
    if isinstance(t, IntLit):
        return t.value
    if isinstance(t, RatLit):
        return t.value
    if isinstance(t, StrLit):
        if t.type == STRING:
            return t.value
        return FinElem(t.type, t.value)
    if isinstance(t, Add):
        lv = eval_term(t.left, binding, interp)
        rv = eval_term(t.right, binding, interp)
        _want_numeric(lv, rv)
        return lv + rv
    if isinstance(t, Neg):
        v = eval_term(t.arg, binding, interp)
        _want_numeric(v)
        return -v
    if isinstance(t, FunApp):
        args = tuple(eval_term(a, binding, interp) for a in t.args)
        return interp.apply(t.name, args)
    if isinstance(t, Agg):
        return aggregate(t.op, eval_list(t.arg, binding, interp))
    raise TypeError(f"not a term: {t!r}")


def eval_list(t: ListTerm, binding: Mapping[str, Value], interp: Interpretations) -> tuple:
    if isinstance(t, ListRef):
        v = _lookup(binding, t.name)
        if not isinstance(v, tuple):
            raise GuardEvalError(f"list variable {t.name} bound to non-list {v!r}")
        return v
    if isinstance(t, MapFun):
        return tuple(interp.apply(t.name, (x,)) for x in eval_list(t.arg, binding, interp))
    raise TypeError(f"not a list term: {t!r}")


def _lookup(binding: Mapping[str, Value], name: str) -> Value:
    if name not in binding:
        raise GuardEvalError(f"unbound variable {name}")
    return binding[name]


def _want_numeric(*vs: Value) -> None:
    for v in vs:
        if not is_numeric(v):
            raise GuardEvalError(f"arithmetic over non-numeric value {v!r}")


# ---------------------------------------------------------------------------
# SMT lowering
# ---------------------------------------------------------------------------


def smt_sort(tname: str) -> str:
    """Solver sort of a base type; non-numeric types are integer-coded."""
    if tname == BOOL:
        return "Bool"
    if tname == RAT:
        return "Real"
    return "Int"


@dataclass(frozen=True)
class ListSlots:
    """Bounded-array view of a list variable: element terms plus a length
    term; slot i is populated iff i < length."""

    elems: tuple[str, ...]
    length: str


class SmtMapping:
    """Variable/function/value translation used by :func:`lower_to_smt`.

    ``scalars`` maps variable names to solver terms, ``lists`` to
    :class:`ListSlots`.  ``code`` turns a string, finset element, or object id
    into its integer code.  Function symbols keep their own solver names;
    every name the lowering touches is recorded in ``used_functions`` so the
    caller can declare it and assert its interpretation table point-wise.
    """

    def __init__(
        self,
        scalars: Optional[Mapping[str, str]] = None,
        lists: Optional[Mapping[str, ListSlots]] = None,
        functions: Optional[Mapping[str, str]] = None,
        code=None,
    ):
        self.scalars = dict(scalars or {})
        self.lists = dict(lists or {})
        self.functions = dict(functions or {})
        self._code = code
        self.used_functions: set[str] = set()

    def scalar(self, name: str) -> str:
        if name not in self.scalars:
            raise GuardEvalError(f"no solver variable for {name}")
        return self.scalars[name]

    def list_slots(self, name: str) -> ListSlots:
        if name not in self.lists:
            raise GuardEvalError(f"no solver slots for list variable {name}")
        return self.lists[name]

    def function(self, name: str) -> str:
        self.used_functions.add(name)
        return self.functions.get(name, name)

    def code(self, tname: str, value: Value) -> int:
        if self._code is None:
            raise GuardEvalError("no value coder configured")
        return self._code(tname, value)


def smt_int(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"

def smt_rat(q: Fraction) -> str:
    num, den = q.numerator, q.denominator
    body = f"{abs(num)}.0" if den == 1 else f"(/ {abs(num)}.0 {den}.0)"
    return f"(- {body})" if num < 0 else body


def _as_real(term: str, tname: str) -> str:
    return f"(to_real {term})" if tname == INT else term


def lower_to_smt(expr: Constraint, mapping: SmtMapping) -> str:
    """Lower a typed constraint to one SMT term.

    Aggregator well-definedness conditions (non-empty list for min/max/mean)
    are conjoined at the root, mirroring the evaluator's fail-closed rule.
    """
    conds: list[str] = []
    body = _lower_c(expr, mapping, conds)
    if conds:
        return "(and " + " ".join([body] + conds) + ")"
    return body


def _lower_c(c: Constraint, m: SmtMapping, conds: list) -> str:
    if isinstance(c, BoolLit):
        return "true" if c.value else "false"
    if isinstance(c, BoolVar):
        return m.scalar(c.name)
    if isinstance(c, And):
        return f"(and {_lower_c(c.left, m, conds)} {_lower_c(c.right, m, conds)})"
    if isinstance(c, Not):
        return f"(not {_lower_c(c.arg, m, conds)})"
    if isinstance(c, Eq):
        return f"(= {_lower_t(c.left, m, conds)} {_lower_t(c.right, m, conds)})"
    if isinstance(c, (Ge, Gt)):
        lt, rt = term_type(c.left), term_type(c.right)
        lhs, rhs = _lower_t(c.left, m, conds), _lower_t(c.right, m, conds)
        if RAT in (lt, rt):
            lhs, rhs = _as_real(lhs, lt), _as_real(rhs, rt)
        op = ">=" if isinstance(c, Ge) else ">"
        return f"({op} {lhs} {rhs})"
    if isinstance(c, RelApp):
        args = " ".join(_lower_t(a, m, conds) for a in c.args)
        return f"({m.function(c.name)} {args})"
    raise TypeError(f"not a constraint: {c!r}")


def _lower_t(t: Term, m: SmtMapping, conds: list) -> str:
    if isinstance(t, VarRef):
        return m.scalar(t.name)
    if isinstance(t, IntLit):
        return smt_int(t.value)
    if isinstance(t, RatLit):
        return smt_rat(t.value)
    if isinstance(t, StrLit):
        return smt_int(m.code(t.type, t.value if t.type == STRING else FinElem(t.type, t.value)))
    if isinstance(t, Add):
        lhs, rhs = _lower_t(t.left, m, conds), _lower_t(t.right, m, conds)
        if t.type == RAT:
            lhs = _as_real(lhs, term_type(t.left))
            rhs = _as_real(rhs, term_type(t.right))
        return f"(+ {lhs} {rhs})"
    if isinstance(t, Neg):
        return f"(- {_lower_t(t.arg, m, conds)})"
    if isinstance(t, FunApp):
        args = " ".join(_lower_t(a, m, conds) for a in t.args)
        return f"({m.function(t.name)} {args})"
    if isinstance(t, Agg):
        slots = _lower_list(t.arg, m, conds)
        return _lower_agg(t, slots, conds)
    raise TypeError(f"not a term: {t!r}")


def _lower_list(t: ListTerm, m: SmtMapping, conds: list) -> ListSlots:
    if isinstance(t, ListRef):
        return m.list_slots(t.name)
    if isinstance(t, MapFun):
        inner = _lower_list(t.arg, m, conds)
        fn = m.function(t.name)
        return ListSlots(tuple(f"({fn} {e})" for e in inner.elems), inner.length)
    raise TypeError(f"not a list term: {t!r}")


def _present(slots: ListSlots, i: int) -> str:
    return f"(>= {slots.length} {i + 1})"


def _lower_agg(t: Agg, slots: ListSlots, conds: list) -> str:
    elem_type = t.arg.type.elem
    zero = "0.0" if elem_type == RAT else "0"
    if t.op == "sum":
        if not slots.elems:
            return zero
        parts = [f"(ite {_present(slots, i)} {e} {zero})" for i, e in enumerate(slots.elems)]
        return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"
    conds.append(f"(>= {slots.length} 1)")
    if not slots.elems:
        return zero
    if t.op in ("min", "max"):
        cmp_op = "<" if t.op == "min" else ">"
        acc = slots.elems[0]
        for i, e in enumerate(slots.elems[1:], start=1):
            acc = f"(ite (and {_present(slots, i)} ({cmp_op} {e} {acc})) {e} {acc})"
        return acc
    # mean over rationals: divide the guarded sum by each possible length
    parts = [f"(ite {_present(slots, i)} {e} 0.0)" for i, e in enumerate(slots.elems)]
    total = parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"
    out = f"(/ {total} {len(slots.elems)}.0)"
    for k in range(len(slots.elems) - 1, 0, -1):
        out = f"(ite (= {slots.length} {k}) (/ {total} {k}.0) {out})"
    return out
