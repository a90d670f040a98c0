"""Parses, evaluates and exactly differentiates the scalar expressions every
piece of geometric data is written in

Derivatives come from forward mode dual numbers. Each differentiation gets its
own perturbation tag so derivatives can be nested (a Jacobian evaluated on dual
inputs gives second derivatives) without the perturbations getting mixed up.
"""
import itertools
import math
from dataclasses import dataclass, field

import regex

from .errors import DomainError, ExprSyntaxError, UnboundVariableError

try:
    from fuzzywuzzy import process as fuzzy_process
except ImportError:
    fuzzy_process = None

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Dual",
    "VarEnv",
    "parse",
    "evaluate",
    "diff",
    "gradient",
    "new_tag",
    "seed",
    "real_part",
    "tangent_part",
    "FUNCTIONS",
]

__copyright__ = """
    lagmech - Lagrangian mechanics on chart-described manifolds
    Copyright (C) 2021 Jago Strong-Wright

    This program is free software: you can redistribute it and/or modify
    it under the terms of the GNU General Public License as published by
    the Free Software Foundation, either version 3 of the License, or
    (at your option) any later version.

    This program is distributed in the hope that it will be useful,
    but WITHOUT ANY WARRANTY; without even the implied warranty of
    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
    GNU General Public License for more details.

    You should have received a copy of the GNU General Public License
    along with this program.  If not, see <https://www.gnu.org/licenses/>."""

# A variable environment is an ordinary (ordered) dict of name -> value
VarEnv = dict

_tags = itertools.count(1)


def new_tag():
    """Returns a perturbation tag no other differentiation is using"""
    return next(_tags)


class Dual:
    """A value with one tagged first order perturbation, val + der*eps

    val and der can themselves be Dual numbers with an older (smaller) tag,
    which is how derivatives of derivatives are taken.
    """

    __slots__ = ("val", "der", "tag")

    def __init__(self, val, der, tag):
        self.val = val
        self.der = der
        self.tag = tag

    def __repr__(self):
        return "Dual(%r, %r, tag=%s)" % (self.val, self.der, self.tag)

    def __add__(self, other):
        return _add(self, other)

    def __radd__(self, other):
        return _add(other, self)

    def __sub__(self, other):
        return _sub(self, other)

    def __rsub__(self, other):
        return _sub(other, self)

    def __mul__(self, other):
        return _mul(self, other)

    def __rmul__(self, other):
        return _mul(other, self)

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(other, self)

    def __neg__(self):
        return _neg(self)

    def __pow__(self, other):
        return _pow(self, other)

    def __rpow__(self, other):
        return _pow(other, self)


def seed(value, tag):
    """Starts a perturbation of value along the tag

    Args:
        value (float or Dual): Point to perturb
        tag (int): Tag from new_tag

    Returns:
        Dual: value + eps
    """
    return Dual(value, 1.0, tag)


def real_part(x):
    """Strips every perturbation off x"""
    while isinstance(x, Dual):
        x = x.val
    return x


def tangent_part(x, tag):
    """The coefficient of the eps with the given tag (0 when x does not depend on it)"""
    if isinstance(x, Dual) and x.tag == tag:
        return x.der
    return 0.0


def _tag_of(x):
    return x.tag if isinstance(x, Dual) else 0


def _split(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.val, x.der
    return x, 0.0


def _zero(x):
    return not isinstance(x, Dual) and x == 0


def _checked(value, what):
    if math.isnan(value) or math.isinf(value):
        raise DomainError("{what} gave a non finite result".format(what=what))
    return value


def _add(a, b):
    tag = max(_tag_of(a), _tag_of(b))
    if tag == 0:
        return _checked(a + b, "addition")
    av, ad = _split(a, tag)
    bv, bd = _split(b, tag)
    return Dual(_add(av, bv), _add(ad, bd), tag)


def _neg(a):
    if isinstance(a, Dual):
        return Dual(_neg(a.val), _neg(a.der), a.tag)
    return -a


def _sub(a, b):
    return _add(a, _neg(b))


def _mul(a, b):
    tag = max(_tag_of(a), _tag_of(b))
    if tag == 0:
        return _checked(a * b, "multiplication")
    av, ad = _split(a, tag)
    bv, bd = _split(b, tag)
    if _zero(ad) and _zero(bd):
        return Dual(_mul(av, bv), 0.0, tag)
    return Dual(_mul(av, bv), _add(_mul(av, bd), _mul(ad, bv)), tag)


def _div(a, b):
    tag = max(_tag_of(a), _tag_of(b))
    if tag == 0:
        if b == 0:
            raise DomainError("division by zero ({a}/0)".format(a=a))
        return _checked(a / b, "division")
    av, ad = _split(a, tag)
    bv, bd = _split(b, tag)
    value = _div(av, bv)
    if _zero(ad) and _zero(bd):
        return Dual(value, 0.0, tag)
    return Dual(value, _div(_sub(ad, _mul(value, bd)), bv), tag)


def _is_integral(x):
    return float(x).is_integer()


def _pow(a, b):
    tag = max(_tag_of(a), _tag_of(b))
    if tag == 0:
        if a < 0 and not _is_integral(b):
            raise DomainError(
                "negative base {a} raised to the non integer power {b}".format(a=a, b=b)
            )
        if a == 0 and b < 0:
            raise DomainError("zero raised to the negative power {b}".format(b=b))
        try:
            return _checked(math.pow(a, b), "power")
        except OverflowError:
            raise DomainError("overflow in {a}^{b}".format(a=a, b=b))
    av, ad = _split(a, tag)
    bv, bd = _split(b, tag)
    if _zero(bd):
        value = _pow(av, bv)
        if _zero(ad):
            return Dual(value, 0.0, tag)
        if real_part(bv) == 0:
            return Dual(value, 0.0, tag)
        return Dual(value, _mul(_mul(bv, _pow(av, _sub(bv, 1.0))), ad), tag)
    # variable exponent, only defined for positive bases
    if real_part(av) <= 0:
        raise DomainError(
            "power with a variable exponent needs a positive base, got {a}".format(
                a=real_part(av)
            )
        )
    return _exp(_mul(b, _log(a)))


def _sin(a):
    if isinstance(a, Dual):
        return Dual(_sin(a.val), _mul(_cos(a.val), a.der), a.tag)
    return math.sin(a)


def _cos(a):
    if isinstance(a, Dual):
        return Dual(_cos(a.val), _neg(_mul(_sin(a.val), a.der)), a.tag)
    return math.cos(a)


def _tan(a):
    if isinstance(a, Dual):
        c = _cos(a.val)
        return Dual(_tan(a.val), _div(a.der, _mul(c, c)), a.tag)
    if math.cos(a) == 0:
        raise DomainError("tan is not defined at {a}".format(a=a))
    return _checked(math.tan(a), "tan")


def _exp(a):
    if isinstance(a, Dual):
        value = _exp(a.val)
        return Dual(value, _mul(value, a.der), a.tag)
    try:
        return math.exp(a)
    except OverflowError:
        raise DomainError("overflow in exp({a})".format(a=a))


def _log(a):
    if isinstance(a, Dual):
        return Dual(_log(a.val), _div(a.der, a.val), a.tag)
    if a <= 0:
        raise DomainError("log of the non positive number {a}".format(a=a))
    return math.log(a)


def _sqrt(a):
    if isinstance(a, Dual):
        value = _sqrt(a.val)
        if _zero(a.der):
            return Dual(value, 0.0, a.tag)
        if real_part(value) == 0:
            raise DomainError("sqrt is not differentiable at 0")
        return Dual(value, _div(a.der, _mul(2.0, value)), a.tag)
    if a < 0:
        raise DomainError("sqrt of the negative number {a}".format(a=a))
    return math.sqrt(a)


def _atan2(y, x):
    tag = max(_tag_of(y), _tag_of(x))
    if tag == 0:
        if x == 0 and y == 0:
            raise DomainError("atan2 is not defined at (0, 0)")
        return math.atan2(y, x)
    yv, yd = _split(y, tag)
    xv, xd = _split(x, tag)
    value = _atan2(yv, xv)
    norm = _add(_mul(xv, xv), _mul(yv, yv))
    return Dual(value, _div(_sub(_mul(xv, yd), _mul(yv, xd)), norm), tag)


# name: (arity, implementation)
FUNCTIONS = {
    "sin": (1, _sin),
    "cos": (1, _cos),
    "tan": (1, _tan),
    "exp": (1, _exp),
    "log": (1, _log),
    "sqrt": (1, _sqrt),
    "atan2": (2, _atan2),
}

_BINARY = {"+": _add, "-": _sub, "*": _mul, "/": _div, "^": _pow}


class Expr:
    """Base of the expression tree. Trees are immutable once built."""

    def eval(self, env):
        """Evaluates the expression

        Args:
            env (dict): Values for the variables, floats or Dual numbers

        Raises:
            UnboundVariableError: A variable has no value in env
            DomainError: A function was evaluated outside its domain

        Returns:
            float or Dual: Value (a Dual when env contains Dual numbers)
        """
        raise NotImplementedError

    def substitute(self, mapping):
        """Replaces variables by expressions

        Args:
            mapping (dict): Variable name -> Expr

        Returns:
            Expr: New tree, self is left untouched
        """
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Expr):
    value: float
    variables: frozenset = field(default=frozenset(), init=False, compare=False, repr=False)

    def eval(self, env):
        return self.value

    def substitute(self, mapping):
        return self

    def __str__(self):
        if self.value < 0:
            return "(-%r)" % (-float(self.value))
        return repr(float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str
    variables: frozenset = field(default=frozenset(), init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", frozenset([self.name]))

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnboundVariableError(
                "The variable '{name}' has no value, the bound variables are {bound}".format(
                    name=self.name, bound=sorted(env.keys())
                )
            )

    def substitute(self, mapping):
        return mapping.get(self.name, self)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    variables: frozenset = field(default=frozenset(), init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", self.operand.variables)

    def eval(self, env):
        return _neg(self.operand.eval(env))

    def substitute(self, mapping):
        return Neg(self.operand.substitute(mapping))

    def __str__(self):
        return "(-%s)" % self.operand


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    variables: frozenset = field(default=frozenset(), init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "variables", self.left.variables | self.right.variables
        )

    def eval(self, env):
        return _BINARY[self.op](self.left.eval(env), self.right.eval(env))

    def substitute(self, mapping):
        return BinOp(
            self.op, self.left.substitute(mapping), self.right.substitute(mapping)
        )

    def __str__(self):
        return "(%s %s %s)" % (self.left, self.op, self.right)


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple
    variables: frozenset = field(default=frozenset(), init=False, compare=False, repr=False)

    def __post_init__(self):
        names = frozenset()
        for arg in self.args:
            names = names | arg.variables
        object.__setattr__(self, "variables", names)

    def eval(self, env):
        return FUNCTIONS[self.name][1](*[arg.eval(env) for arg in self.args])

    def substitute(self, mapping):
        return Call(self.name, tuple(arg.substitute(mapping) for arg in self.args))

    def __str__(self):
        return "%s(%s)" % (self.name, ", ".join(str(arg) for arg in self.args))


_TOKEN = regex.compile(
    r"\s*(?:(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[a-zA-Z_][a-zA-Z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source):
    tokens = []
    position = 0
    while position < len(source):
        if source[position:].strip() == "":
            break
        match = _TOKEN.match(source, position)
        if match is None:
            while source[position].isspace():
                position += 1
            raise ExprSyntaxError(
                "Unexpected character '%s'" % source[position], source, position
            )
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        position = match.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    """Recursive descent over the token list

    Precedence, loosest first: + -, * /, unary -, ^ (right associative), so
    -x^2 is -(x^2) and 2^-1 is 0.5.
    """

    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.index = 0

    def peek(self):
        return self.tokens[self.index]

    def take(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text):
        kind, value, position = self.take()
        if value != text:
            raise ExprSyntaxError(
                "Expected '%s' but found '%s'" % (text, value or "end of input"),
                self.source,
                position,
            )

    def parse(self):
        tree = self.sum()
        kind, value, position = self.peek()
        if kind != "end":
            raise ExprSyntaxError(
                "Unexpected '%s' after a complete expression" % value,
                self.source,
                position,
            )
        return tree

    def sum(self):
        tree = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            tree = BinOp(op, tree, self.product())
        return tree

    def product(self):
        tree = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            tree = BinOp(op, tree, self.unary())
        return tree

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, value, position = self.take()
        if kind == "number":
            return Num(float(value))
        if kind == "ident":
            if self.peek()[1] == "(":
                return self.call(value, position)
            return Var(value)
        if value == "(":
            tree = self.sum()
            self.expect(")")
            return tree
        raise ExprSyntaxError(
            "Expected a number, variable, function or '(' but found '%s'"
            % (value or "end of input"),
            self.source,
            position,
        )

    def call(self, name, position):
        if name not in FUNCTIONS:
            message = "Unknown function '%s'" % name
            if fuzzy_process is not None:
                guess = fuzzy_process.extractOne(name, list(FUNCTIONS.keys()))
                if guess is not None and guess[1] >= 60:
                    message += ", did you mean '%s'?" % guess[0]
            raise ExprSyntaxError(message, self.source, position)
        self.expect("(")
        args = [self.sum()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.sum())
        self.expect(")")
        arity = FUNCTIONS[name][0]
        if len(args) != arity:
            raise ExprSyntaxError(
                "%s takes %s argument(s) but %s were given" % (name, arity, len(args)),
                self.source,
                position,
            )
        return Call(name, tuple(args))


def parse(source):
    """Parses a single expression

    Args:
        source (str or number): Expression text such as "x^2 + sin(y)". Numbers are accepted as constants.

    Raises:
        ExprSyntaxError: The text is not a valid expression, the error carries the position

    Returns:
        Expr: Expression tree
    """
    if isinstance(source, Expr):
        return source
    if isinstance(source, (int, float)):
        return Num(float(source))
    return _Parser(str(source)).parse()


def evaluate(e, env):
    """Evaluates an expression on plain numbers

    Args:
        e (Expr): Expression
        env (dict): Variable values

    Returns:
        float: Value
    """
    return float(real_part(e.eval(env)))


def diff(e, var, env):
    """Exact partial derivative of e with respect to var at env

    Works on dual valued environments too, giving derivatives of derivatives.

    Args:
        e (Expr): Expression
        var (str): Variable to differentiate by
        env (dict): Point of evaluation, must bind var

    Raises:
        UnboundVariableError: var, or another variable of e, has no value

    Returns:
        float or Dual: de/dvar
    """
    if var not in env:
        raise UnboundVariableError(
            "Cannot differentiate by '{var}', it has no value".format(var=var)
        )
    if var not in e.variables:
        return 0.0
    tag = new_tag()
    seeded = dict(env)
    seeded[var] = seed(env[var], tag)
    return tangent_part(e.eval(seeded), tag)


def gradient(e, names, env):
    """Exact partial derivatives of e with respect to each of names

    Args:
        e (Expr): Expression
        names (list): Variables to differentiate by
        env (dict): Point of evaluation

    Returns:
        list: One derivative per name
    """
    return [diff(e, name, env) for name in names]
