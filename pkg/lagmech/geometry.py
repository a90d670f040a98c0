"""Chart level pseudo-Riemannian machinery: metrics, their inverses and
Christoffel symbols, gradients of 1-forms and second fundamental forms

Everything is computed in the coordinates of one chart. Derivatives of metric
entries are exact (dual numbers), never finite differences.
"""
from dataclasses import dataclass

import numpy as np
import regex
import scipy.linalg
from scipy.stats import qmc

from .errors import ConfigError, DegenerateMetricError, DomainError
from .expr import Dual, Num, diff, new_tag, parse, real_part, tangent_part

__all__ = [
    "Chart",
    "TangentState",
    "MetricField",
    "ExprMetric",
    "LocalGeometry",
    "OneForm",
    "ExprForm",
    "ExactForm",
    "VectorField",
    "metric_at",
    "inverse_at",
    "christoffel",
    "grad_form",
    "second_fundamental_form",
    "along",
]

_IDENT = regex.compile(r"^[a-zA-Z_][a-zA-Z0-9_]*$")

# above this condition number a metric is treated as singular
DEGENERATE_CONDITION = 1e13

# entries that differ as expressions are compared by value at this many points
SYMMETRY_SAMPLES = 8


def _scalar(x):
    return x if isinstance(x, Dual) else float(x)


def along(values, direction, tag):
    """Seeds every coordinate with its own rate of change, so that evaluating a
    function on the result gives its derivative along direction in one pass

    Args:
        values (sequence): Point
        direction (sequence): Direction, same length as values
        tag (int): Perturbation tag

    Returns:
        list: Dual numbers value + direction*eps
    """
    return [Dual(_scalar(v), float(d), tag) for v, d in zip(values, direction)]


class Chart:
    """Ordered coordinate names (q^1..q^n) of the chart a run works in"""

    def __init__(self, names):
        """Create chart

        Args:
            names (list): Coordinate names

        Raises:
            ConfigError: Names are repeated, not identifiers, end in "_dot" or use "t" anywhere but first
        """
        names = tuple(names)
        if len(names) < 1:
            raise ConfigError("A chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise ConfigError("Chart coordinate names must be distinct, got %s" % (names,))
        for ind, name in enumerate(names):
            if not _IDENT.match(name):
                raise ConfigError("'%s' is not a valid coordinate name" % name)
            if name.endswith("_dot"):
                raise ConfigError(
                    "Coordinate names can not end in '_dot' ('%s'), that suffix names velocities"
                    % name
                )
            if name == "t" and ind != 0:
                raise ConfigError(
                    "'t' is reserved for the frame parameter and can only be the first coordinate"
                )
        self.names = names
        self.velocity_names = tuple(name + "_dot" for name in names)

    @property
    def dim(self):
        return len(self.names)

    def index(self, name):
        return self.names.index(name)

    def bind(self, q, qdot=None):
        """Builds the variable environment for a point (and velocity) of the chart

        Args:
            q (sequence): Coordinates
            qdot (sequence, optional): Velocities, bound as <name>_dot. Defaults to None.

        Returns:
            dict: Environment for Expr.eval
        """
        env = {name: _scalar(value) for name, value in zip(self.names, q)}
        if qdot is not None:
            env.update(
                {name: _scalar(value) for name, value in zip(self.velocity_names, qdot)}
            )
        return env

    def allowed_variables(self):
        return set(self.names) | set(self.velocity_names)

    def __eq__(self, other):
        return isinstance(other, Chart) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __str__(self):
        return "Chart(%s)" % ", ".join(self.names)


@dataclass(frozen=True)
class TangentState:
    """A point of TM in chart coordinates"""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        qdot = np.array(self.qdot, dtype=float).reshape(-1)
        if q.shape != qdot.shape:
            raise ValueError(
                "Positions and velocities have different lengths (%s and %s)"
                % (len(q), len(qdot))
            )
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
            raise ValueError("A tangent state must be finite, got q=%s qdot=%s" % (q, qdot))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)

    @property
    def dim(self):
        return len(self.q)

    def __str__(self):
        return "(q=%s, qdot=%s)" % (list(self.q), list(self.qdot))


@dataclass
class LocalGeometry:
    """Everything a metric gives at one point: g, g^-1, dg[i,j,k] = dg_ij/dq^k and
    the Christoffel symbols of the first (gamma1[i,j,k] = Gamma_ij,k) and second
    (gamma2[l,i,j] = Gamma^l_ij) kind"""

    q: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray

    def quadratic(self, qdot):
        """Gamma^l_ij qdot^i qdot^j"""
        return np.einsum("lij,i,j->l", self.gamma2, qdot, qdot)


class MetricField:
    """Metric coefficients g_ij(q) of a chart

    Subclasses only implement matrix(q), which must work when q holds Dual
    numbers; values, inverses and exact derivatives are built on it.
    """

    def __init__(self, chart):
        self.chart = chart

    @property
    def dim(self):
        return self.chart.dim

    def matrix(self, q):
        """Metric coefficients at q, generic over Dual coordinates

        Args:
            q (list): Coordinates (floats or Dual numbers)

        Returns:
            list: n x n nested list, entries are Dual numbers when q holds them
        """
        raise NotImplementedError

    def depends_on(self, k):
        """Whether any coefficient can depend on coordinate k"""
        return True

    def metric_at(self, q):
        """Metric coefficients at q

        Args:
            q (sequence): Coordinates

        Raises:
            DegenerateMetricError: det g = 0 at q

        Returns:
            numpy array: Symmetric n x n matrix
        """
        g = np.array(
            [[float(real_part(x)) for x in row] for row in self.matrix(list(q))],
            dtype=float,
        )
        self._check(g, q)
        return g

    def _check(self, g, q):
        if not np.all(np.isfinite(g)):
            raise DegenerateMetricError(
                "The metric is not finite at q={q}: {g}".format(q=list(q), g=g.tolist())
            )
        condition = np.linalg.cond(g)
        if not np.isfinite(condition) or condition > DEGENERATE_CONDITION:
            raise DegenerateMetricError(
                "The metric is degenerate at q={q} (condition number {c:.3g}):\n{g}".format(
                    q=list(q), c=condition, g=g
                )
            )

    def inverse_at(self, q):
        """Inverse (dual) metric coefficients g^ij at q

        Raises:
            DegenerateMetricError: det g = 0 at q
        """
        return scipy.linalg.inv(self.metric_at(q))

    def derivatives_at(self, q):
        """Exact first derivatives of the coefficients

        Args:
            q (sequence): Coordinates

        Returns:
            numpy array: dg[i, j, k] = d g_ij / d q^k
        """
        n = self.dim
        dg = np.zeros((n, n, n))
        q = [float(v) for v in q]
        for k in range(n):
            if not self.depends_on(k):
                continue
            tag = new_tag()
            seeded = list(q)
            seeded[k] = Dual(q[k], 1.0, tag)
            m = self.matrix(seeded)
            for i in range(n):
                for j in range(n):
                    dg[i, j, k] = float(real_part(tangent_part(m[i][j], tag)))
        return dg

    def local(self, q):
        """Computes the whole LocalGeometry at q

        Raises:
            DegenerateMetricError: det g = 0 at q
        """
        q = np.array(q, dtype=float)
        g = self.metric_at(q)
        ginv = scipy.linalg.inv(g)
        dg = self.derivatives_at(q)
        gamma1 = 0.5 * (
            np.einsum("ikj->ijk", dg) + np.einsum("jki->ijk", dg) - dg
        )
        gamma2 = np.einsum("lk,ijk->lij", ginv, gamma1)
        return LocalGeometry(q, g, ginv, dg, gamma1, gamma2)


def _same_function(a, b, chart, tolerance=1e-12):
    """Whether two expressions of the coordinates agree at the points of a Halton
    sequence in [-2, 2]^n where both are defined, False when they are defined nowhere"""
    unit = qmc.Halton(d=chart.dim, scramble=False).random(SYMMETRY_SAMPLES + 1)[1:]
    compared = 0
    for q in -2.0 + 4.0 * unit:
        env = chart.bind(q)
        try:
            x, y = float(a.eval(env)), float(b.eval(env))
        except DomainError:
            continue
        if abs(x - y) > tolerance * (1.0 + max(abs(x), abs(y))):
            return False
        compared += 1
    return compared > 0


class ExprMetric(MetricField):
    """A metric whose coefficients are expressions of the chart coordinates"""

    def __init__(self, chart, entries):
        """Create metric from a full, symmetric grid of expressions

        Args:
            chart (Chart): Chart the coefficients are written in
            entries (list): n x n expressions (text, numbers or Expr)

        Raises:
            ConfigError: Wrong shape, not symmetric, or depending on something other than the coordinates
        """
        super().__init__(chart)
        n = chart.dim
        if len(entries) != n or any(len(row) != n for row in entries):
            raise ConfigError("The metric must be a %s x %s grid of expressions" % (n, n))
        grid = [[parse(entries[i][j]) for j in range(n)] for i in range(n)]
        for row in grid:
            for entry in row:
                extra = entry.variables - set(chart.names)
                if extra:
                    raise ConfigError(
                        "Metric coefficient '%s' depends on %s, it may only use the coordinates %s"
                        % (entry, sorted(extra), list(chart.names))
                    )
        for i in range(n):
            for j in range(i):
                if grid[i][j] == grid[j][i]:
                    continue
                if not _same_function(grid[i][j], grid[j][i], chart):
                    raise ConfigError(
                        "The metric must be symmetric but g_{i}{j} = {a} and g_{j}{i} = {b}".format(
                            i=i, j=j, a=grid[i][j], b=grid[j][i]
                        )
                    )
                grid[j][i] = grid[i][j]
        self.entries = grid
        self._depends = [
            any(chart.names[k] in e.variables for row in grid for e in row)
            for k in range(n)
        ]
        self._constant = None
        if not any(self._depends):
            self._constant = [[float(e.eval({})) for e in row] for row in grid]

    @classmethod
    def from_lower(cls, chart, rows):
        """Create metric from its lower triangle, rows[i] holding g_i0 .. g_ii

        Args:
            chart (Chart): Chart
            rows (list): Lower triangular rows of expressions

        Returns:
            ExprMetric: Symmetric metric
        """
        n = chart.dim
        if len(rows) != n or any(len(row) != i + 1 for i, row in enumerate(rows)):
            raise ConfigError(
                "A lower triangular metric needs rows of lengths 1..%s, got lengths %s"
                % (n, [len(row) for row in rows])
            )
        parsed = [[parse(entry) for entry in row] for row in rows]
        full = [
            [parsed[max(i, j)][min(i, j)] for j in range(n)] for i in range(n)
        ]
        return cls(chart, full)

    @classmethod
    def euclidean(cls, chart):
        n = chart.dim
        return cls(chart, [[Num(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)])

    def lower(self):
        """Lower triangle as text, the inverse of from_lower"""
        return [[str(self.entries[i][j]) for j in range(i + 1)] for i in range(self.dim)]

    def depends_on(self, k):
        return self._depends[k]

    def matrix(self, q):
        if self._constant is not None:
            return self._constant
        env = self.chart.bind(q)
        return [[e.eval(env) for e in row] for row in self.entries]


class OneForm:
    """A horizontal 1-form A_i dq^i on TM"""

    def __init__(self, chart):
        self.chart = chart

    depends_on_velocity = False

    def components(self, env):
        """Components A_i, generic over Dual valued environments

        Args:
            env (dict): Environment from Chart.bind

        Returns:
            list: n components
        """
        raise NotImplementedError

    def at(self, state):
        """Components at a tangent state

        Args:
            state (TangentState): Where to evaluate

        Returns:
            numpy array: A_i
        """
        env = self.chart.bind(state.q, state.qdot)
        return np.array([float(real_part(a)) for a in self.components(env)])

    def at_point(self, q):
        """Components of a form with q-only components"""
        return self.at(TangentState(q, np.zeros(len(q))))

    def dot(self, state):
        """The function beta_dot = A_i qdot^i on TM"""
        return float(np.dot(self.at(state), state.qdot))

    def jacobian(self, q):
        """Exact dA_i/dq^j of a form with q-only components

        Returns:
            numpy array: J[i, j] = dA_i / dq^j
        """
        n = self.chart.dim
        jac = np.zeros((n, n))
        zeros = [0.0] * n
        for j in range(n):
            tag = new_tag()
            seeded = [float(v) for v in q]
            seeded[j] = Dual(seeded[j], 1.0, tag)
            values = self.components(self.chart.bind(seeded, zeros))
            jac[:, j] = [float(real_part(tangent_part(a, tag))) for a in values]
        return jac


class ExprForm(OneForm):
    """A 1-form whose components are expressions of q (and optionally q_dot)"""

    def __init__(self, chart, components):
        """Create form

        Args:
            chart (Chart): Chart
            components (list): n expressions

        Raises:
            ConfigError: Wrong number of components or unknown variables
        """
        super().__init__(chart)
        if len(components) != chart.dim:
            raise ConfigError(
                "A 1-form on this chart needs %s components, got %s"
                % (chart.dim, len(components))
            )
        self.exprs = [parse(c) for c in components]
        allowed = chart.allowed_variables()
        for e in self.exprs:
            extra = e.variables - allowed
            if extra:
                raise ConfigError(
                    "Form component '%s' uses %s, only %s are bound"
                    % (e, sorted(extra), sorted(allowed))
                )
        self.depends_on_velocity = any(
            e.variables & set(chart.velocity_names) for e in self.exprs
        )

    @classmethod
    def zero(cls, chart):
        return cls(chart, [Num(0.0)] * chart.dim)

    def components(self, env):
        return [e.eval(env) for e in self.exprs]

    def __str__(self):
        return " + ".join(
            "(%s) d%s" % (e, name) for e, name in zip(self.exprs, self.chart.names)
        )


class ExactForm(OneForm):
    """The differential dB of a function B(q), components taken by exact differentiation"""

    def __init__(self, chart, function):
        """Create form

        Args:
            chart (Chart): Chart
            function (str or Expr): B

        Raises:
            ConfigError: B depends on something other than the coordinates
        """
        super().__init__(chart)
        self.function = parse(function)
        extra = self.function.variables - set(chart.names)
        if extra:
            raise ConfigError(
                "The function '%s' of an exact form may only depend on %s, it uses %s"
                % (self.function, list(chart.names), sorted(extra))
            )

    def components(self, env):
        return [diff(self.function, name, env) for name in self.chart.names]

    def value(self, q):
        """B(q)"""
        return float(real_part(self.function.eval(self.chart.bind(q))))

    def __str__(self):
        return "d(%s)" % self.function


class VectorField:
    """A vector field v^i d/dq^i on M given by n expressions of q"""

    def __init__(self, chart, components):
        """Create field

        Args:
            chart (Chart): Chart
            components (list): n expressions of the coordinates
        """
        if len(components) != chart.dim:
            raise ConfigError(
                "A vector field on this chart needs %s components, got %s"
                % (chart.dim, len(components))
            )
        self.chart = chart
        self.exprs = [parse(c) for c in components]
        for e in self.exprs:
            extra = e.variables - set(chart.names)
            if extra:
                raise ConfigError(
                    "Vector field component '%s' uses %s, only the coordinates %s are bound"
                    % (e, sorted(extra), list(chart.names))
                )

    def values(self, q):
        env = self.chart.bind(q)
        return [e.eval(env) for e in self.exprs]

    def at(self, q):
        return np.array([float(real_part(v)) for v in self.values(q)])

    def __str__(self):
        return " + ".join(
            "(%s) d/d%s" % (e, name) for e, name in zip(self.exprs, self.chart.names)
        )


def metric_at(g, q):
    """g_ij at q, see MetricField.metric_at"""
    return g.metric_at(q)


def inverse_at(g, q):
    """g^ij at q, see MetricField.inverse_at"""
    return g.inverse_at(q)


def christoffel(g, q):
    """Christoffel symbols of the metric at q

    Args:
        g (MetricField): Metric
        q (sequence): Point

    Raises:
        DegenerateMetricError: The metric is singular at q

    Returns:
        numpy array: Gamma^l_ij indexed [l, i, j]
        numpy array: Gamma_ij,k indexed [i, j, k]
    """
    local = g.local(q)
    return local.gamma2, local.gamma1


def grad_form(g, beta, state):
    """The vector grad beta with i_(grad beta) T2 = beta, i.e. beta with its index raised

    Args:
        g (MetricField): Metric
        beta (OneForm): Form
        state (TangentState): Where to evaluate

    Returns:
        numpy array: Components of grad beta
    """
    return g.inverse_at(state.q) @ beta.at(state)


def second_fundamental_form(g, field, state, local=None):
    """II_v(qdot, qdot) = T2(nabla_qdot v, qdot)

    Equal to qdot^h qdot^k (d(g_jk v^j)/dq^h - Gamma_hk,l v^l). field can be
    the vector field v or a 1-form beta, in which case v = grad beta and
    g_jk v^j is just the component B_k.

    Args:
        g (MetricField): Metric
        field (VectorField or OneForm): v, or beta = i_v T2
        state (TangentState): Base point and the velocity qdot
        local (LocalGeometry, optional): Precomputed geometry at state.q. Defaults to None.

    Raises:
        DegenerateMetricError: The metric is singular at state.q

    Returns:
        float: II_v(qdot, qdot)
    """
    if local is None:
        local = g.local(state.q)
    chart = g.chart
    tag = new_tag()
    seeded = along(state.q, state.qdot, tag)
    if isinstance(field, OneForm):
        lowered = field.components(chart.bind(seeded, state.qdot))
    else:
        m = g.matrix(seeded)
        v = field.values(seeded)
        lowered = [sum(m[j][k] * v[j] for j in range(g.dim)) for k in range(g.dim)]
    values = np.array([float(real_part(b)) for b in lowered])
    rates = np.array([float(real_part(tangent_part(b, tag))) for b in lowered])
    return float(np.dot(rates, state.qdot) - np.dot(values, local.quadratic(state.qdot)))
