"""Linear constraint systems: admissibility, Lagrange multipliers, the
constrained field and its covariant decomposition

A constraint system is a list of horizontal 1-forms beta_k = B_kj(q) dq^j.
The constrained field is D_bar = D + lambda^k V_k where D is the free field and
the multipliers make D_bar beta_k_dot = 0, i.e. they solve the Gram system
G lambda = -D beta_dot with G_kl = <grad beta_k, grad beta_l>.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import MechanicalSystem, SecondOrderField, _free_accel, free_field
from .errors import (
    ConfigError,
    DependentConstraintsError,
    IndefiniteMetricError,
    InadmissibleStateError,
)
from .expr import new_tag, real_part, tangent_part
from .geometry import ExactForm, ExprForm, TangentState, along, second_fundamental_form

__all__ = [
    "ConstraintSystem",
    "MultiplierSolution",
    "Leaf",
    "admissible",
    "gram_matrix",
    "solve_multipliers",
    "constrained_field",
    "orthonormal_field",
    "covariant_decomposition",
    "project_velocity",
    "induced_system",
]

logger = logging.getLogger(__name__)

# Gram matrices with a larger condition number are treated as dependent
DEPENDENT_CONDITION = 1e12


class ConstraintSystem:
    """r horizontal 1-forms beta_k with components depending on q only"""

    def __init__(self, chart, forms, functions=None):
        """Create constraint system

        Args:
            chart (Chart): Chart of M
            forms (list): OneForm objects, or lists of component expressions
            functions (list, optional): B_k with beta_k = dB_k when the system is holonomic. Defaults to None.

        Raises:
            ConfigError: A form depends on velocities, is on another chart, or r >= n
        """
        self.chart = chart
        built = []
        for form in forms:
            if isinstance(form, (list, tuple)):
                form = ExprForm(chart, form)
            if form.chart != chart:
                raise ConfigError("Constraint form %s is written in another chart" % form)
            if form.depends_on_velocity:
                raise ConfigError(
                    "The constraint %s depends on velocities, only linear constraints "
                    "(components depending on q alone) are supported" % form
                )
            built.append(form)
        if len(built) >= chart.dim:
            raise ConfigError(
                "%s constraints on a %s dimensional configuration space leave no motion, "
                "there must be fewer constraints than coordinates" % (len(built), chart.dim)
            )
        self.forms = built
        self.functions = None if functions is None else [f.function for f in built]

    @classmethod
    def holonomic(cls, chart, functions):
        """Constraints beta_k = dB_k, the level sets B_k = b_k are the leaves

        Args:
            chart (Chart): Chart
            functions (list): Expressions B_k(q)

        Returns:
            ConstraintSystem: Holonomic system
        """
        forms = [ExactForm(chart, f) for f in functions]
        return cls(chart, forms, functions=functions)

    @property
    def is_holonomic(self):
        return self.functions is not None

    def levels(self, q):
        """B_k(q) for a holonomic system

        Raises:
            ValueError: The system was not declared holonomic
        """
        if not self.is_holonomic:
            raise ValueError("Only holonomic constraint systems have levels")
        return np.array([form.value(q) for form in self.forms])

    def matrix(self, state):
        """The r x n matrix B_kj at state.q"""
        return _form_matrix(self.forms, self.chart, state)

    def __iter__(self):
        return iter(self.forms)

    def __len__(self):
        return len(self.forms)

    def __str__(self):
        return "{%s}" % ", ".join(str(form) for form in self.forms)


@dataclass
class MultiplierSolution:
    """Lagrange multipliers at one state

    Attributes:
        lambdas (numpy array): lambda^1..lambda^r
        gram (numpy array): G_kl = <grad beta_k, grad beta_l>
        rhs (numpy array): -D beta_dot for the field being constrained
        gradients (numpy array): Row k holds grad beta_k
        residual (float): |G lambda - rhs| relative to the size of the system
    """

    lambdas: np.ndarray
    gram: np.ndarray
    rhs: np.ndarray
    gradients: np.ndarray
    residual: float

    def force(self):
        """lambda^k grad beta_k, the acceleration the constraints add"""
        return self.gradients.T @ self.lambdas


def _form_matrix(forms, chart, state):
    env = chart.bind(state.q, state.qdot)
    rows = [[float(real_part(c)) for c in form.components(env)] for form in forms]
    return np.array(rows, dtype=float).reshape(len(rows), chart.dim)


def _form_rates(forms, chart, state):
    """B and its rate of change dB/dq^h qdot^h along the velocity"""
    tag = new_tag()
    env = chart.bind(along(state.q, state.qdot, tag), state.qdot)
    values = []
    rates = []
    for form in forms:
        comps = form.components(env)
        values.append([float(real_part(c)) for c in comps])
        rates.append([float(real_part(tangent_part(c, tag))) for c in comps])
    shape = (len(values), chart.dim)
    return np.array(values, dtype=float).reshape(shape), np.array(rates, dtype=float).reshape(shape)


def _require_positive(g, q):
    try:
        scipy.linalg.cholesky(g)
    except scipy.linalg.LinAlgError:
        raise IndefiniteMetricError(
            "This operation needs a positive definite metric, at q={q} it has eigenvalues {e}".format(
                q=list(q), e=np.linalg.eigvalsh(g).tolist()
            )
        )


def _solve_gram(gram, rhs, state, what="constraint forms"):
    condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > DEPENDENT_CONDITION:
        raise DependentConstraintsError(
            "The {what} are dependent at {s}, Gram matrix condition number {c:.3g}:\n{g}".format(
                what=what, s=state, c=condition, g=gram
            )
        )
    lambdas = scipy.linalg.solve(gram, rhs, assume_a="sym")
    scale = np.linalg.norm(gram) * np.linalg.norm(lambdas) + np.linalg.norm(rhs)
    residual = np.linalg.norm(gram @ lambdas - rhs)
    if scale > 0:
        residual = residual / scale
    return lambdas, float(residual)


def _multipliers(local, forms, chart, state, accel, what="constraint forms"):
    """Multipliers making accel + lambda^k grad beta_k tangent to every beta_k_dot level"""
    b, b_rates = _form_rates(forms, chart, state)
    gradients = b @ local.ginv
    gram = b @ local.ginv @ b.T
    # D beta_dot = dB/dq qdot qdot + B accel
    d_beta_dot = b_rates @ state.qdot + b @ accel
    lambdas, residual = _solve_gram(gram, -d_beta_dot, state, what)
    return MultiplierSolution(lambdas, gram, -d_beta_dot, gradients, residual)


def admissible(constraints, state):
    """beta_k_dot = B_kj qdot^j for each constraint, the state is admissible when all vanish

    Args:
        constraints (ConstraintSystem): Constraints
        state (TangentState): State

    Returns:
        numpy array: r values
    """
    if len(constraints) == 0:
        return np.zeros(0)
    return constraints.matrix(state) @ state.qdot


def gram_matrix(sys, constraints, state):
    """G_kl = <grad beta_k, grad beta_l> = B_k g^-1 B_l"""
    b = constraints.matrix(state)
    return b @ sys.metric.inverse_at(state.q) @ b.T


def solve_multipliers(sys, constraints, state):
    """Lagrange multipliers of the constrained system at a state

    Args:
        sys (MechanicalSystem): System, its free field is the one constrained
        constraints (ConstraintSystem): Constraints
        state (TangentState): State

    Raises:
        IndefiniteMetricError: The metric is not positive definite at state.q
        DependentConstraintsError: The constraint forms are dependent at state.q

    Returns:
        MultiplierSolution: lambdas and the Gram system they solve
    """
    local = sys.metric.local(state.q)
    _require_positive(local.g, state.q)
    if len(constraints) == 0:
        n = sys.dim
        return MultiplierSolution(np.zeros(0), np.zeros((0, 0)), np.zeros(0), np.zeros((0, n)), 0.0)
    accel = _free_accel(sys, state, local)
    return _multipliers(local, constraints.forms, sys.chart, state, accel)


def constrained_field(sys, constraints):
    """The field D_bar = D + lambda^k V_k of the constrained system

    Args:
        sys (MechanicalSystem): System
        constraints (ConstraintSystem): Constraints

    Returns:
        SecondOrderField: D_bar (the free field when there are no constraints)
    """
    if len(constraints) == 0:
        return free_field(sys)

    def accel(state):
        local = sys.metric.local(state.q)
        _require_positive(local.g, state.q)
        free = _free_accel(sys, state, local)
        solution = _multipliers(local, constraints.forms, sys.chart, state, free)
        return free + solution.force()

    return SecondOrderField(sys.chart, accel, "constrained")


def _orthonormalizer(gram, state):
    """C lower triangular with C G C^T = I (Gram-Schmidt on the gradients)"""
    try:
        lower = scipy.linalg.cholesky(gram, lower=True)
    except scipy.linalg.LinAlgError:
        raise DependentConstraintsError(
            "Gram-Schmidt failed at %s, the constraint gradients are dependent:\n%s" % (state, gram)
        )
    if np.linalg.cond(lower) ** 2 > DEPENDENT_CONDITION:
        raise DependentConstraintsError(
            "Gram-Schmidt is ill conditioned at %s, the constraint gradients are nearly dependent"
            % state
        )
    return scipy.linalg.solve_triangular(lower, np.eye(len(gram)), lower=True)


def orthonormal_field(sys, constraints):
    """D_bar computed with an orthonormalized basis of the constraints,
    D_bar = D - sum_k (D eps_k_dot) E_k with <grad eps_h, grad eps_k> = delta_hk

    The basis coefficients are frozen at each state. Agrees with constrained_field.
    """
    if len(constraints) == 0:
        return free_field(sys)

    def accel(state):
        local = sys.metric.local(state.q)
        _require_positive(local.g, state.q)
        free = _free_accel(sys, state, local)
        b, b_rates = _form_rates(constraints.forms, sys.chart, state)
        gram = b @ local.ginv @ b.T
        c = _orthonormalizer(gram, state)
        basis = c @ b @ local.ginv
        d_eps_dot = c @ (b_rates @ state.qdot + b @ free)
        return free - basis.T @ d_eps_dot

    return SecondOrderField(sys.chart, accel, "constrained (orthonormal)")


def covariant_decomposition(sys, constraints, state, tolerance=1e-8):
    """Splits the covariant value of the constrained field into the projection of
    the free covariant value on the admissible distribution and the second
    fundamental form term -sum_k II_k(qdot, qdot) e_k

    Args:
        sys (MechanicalSystem): System
        constraints (ConstraintSystem): Constraints
        state (TangentState): Admissible state
        tolerance (float, optional): Admissibility tolerance, relative to |qdot|. Defaults to 1e-8.

    Raises:
        InadmissibleStateError: Some beta_k_dot is not zero
        IndefiniteMetricError: The metric is not positive definite
        DependentConstraintsError: Gram-Schmidt failed

    Returns:
        numpy array: Projection part
        numpy array: Curvature part
    """
    local = sys.metric.local(state.q)
    _require_positive(local.g, state.q)
    free_cov = -local.ginv @ sys.work_form.at(state)
    if len(constraints) == 0:
        return free_cov, np.zeros(sys.dim)
    beta_dot = admissible(constraints, state)
    if np.max(np.abs(beta_dot)) > tolerance * (1.0 + np.linalg.norm(state.qdot)):
        raise InadmissibleStateError(
            "The covariant decomposition needs an admissible state, at %s beta_dot = %s"
            % (state, beta_dot.tolist())
        )
    b = constraints.matrix(state)
    c = _orthonormalizer(b @ local.ginv @ b.T, state)
    basis = c @ b @ local.ginv
    projection = free_cov - basis.T @ (basis @ local.g @ free_cov)
    seconds = np.array(
        [second_fundamental_form(sys.metric, form, state, local) for form in constraints]
    )
    curvature = -basis.T @ (c @ seconds)
    return projection, curvature


def project_velocity(sys, forms, state, targets=None):
    """Metric orthogonal projection of qdot onto {beta_k_dot = target_k}

    Args:
        sys (MechanicalSystem): System giving the metric
        forms (iterable): Constraint forms (a ConstraintSystem, or a list that may include a time form)
        state (TangentState): State to correct
        targets (sequence, optional): Wanted values of beta_k_dot. Defaults to all zero.

    Raises:
        DependentConstraintsError: The forms are dependent at state.q

    Returns:
        TangentState: Corrected state, same position
        float: g-norm of the velocity correction
    """
    forms = list(forms)
    if not forms:
        return state, 0.0
    targets = np.zeros(len(forms)) if targets is None else np.asarray(targets, dtype=float)
    ginv = sys.metric.inverse_at(state.q)
    b = _form_matrix(forms, sys.chart, state)
    gram = b @ ginv @ b.T
    mu, _ = _solve_gram(gram, b @ state.qdot - targets, state)
    correction = ginv @ b.T @ mu
    magnitude = float(np.sqrt(abs(correction @ sys.metric.metric_at(state.q) @ correction)))
    logger.debug("velocity projection at %s moved qdot by %.3g", state, magnitude)
    return TangentState(state.q, state.qdot - correction), magnitude


class Leaf:
    """An integral submanifold N of a holonomic system, given by an explicit chart
    s -> q(s) of N"""

    def __init__(self, embedding, inverse=None):
        """Create leaf

        Args:
            embedding (ChartMap): From the leaf chart into the chart of M
            inverse (ChartMap, optional): From M back to the leaf chart, needed by lower. Defaults to None.
        """
        self.embedding = embedding
        self.inverse = inverse

    @property
    def chart(self):
        return self.embedding.source

    def lift(self, state):
        """The state of M over a state of N: (q(s), J sdot)"""
        q = self.embedding.at(state.q)
        return TangentState(q, self.embedding.jacobian(state.q) @ state.qdot)

    def lower(self, state):
        """The state of N under a state of M tangent to the leaf

        Raises:
            ValueError: No inverse map was given
        """
        if self.inverse is None:
            raise ValueError("Lowering states to the leaf needs the inverse of its embedding")
        s = self.inverse.at(state.q)
        jac = self.embedding.jacobian(s)
        sdot, *_ = scipy.linalg.lstsq(jac, state.qdot)
        return TangentState(s, sdot)

    def __str__(self):
        return "Leaf %s -> %s" % (self.embedding.source, self.embedding.target)


def induced_system(sys, leaf):
    """(N, T2_N, alpha_N) with the induced metric and the pulled back work form

    A conservative system induces the conservative system of U restricted to N.

    Args:
        sys (MechanicalSystem): System on M
        leaf (Leaf): Leaf with its chart

    Returns:
        MechanicalSystem: System on N
    """
    from .frames import PullbackForm, PullbackMetric

    metric = PullbackMetric(leaf.embedding, sys.metric)
    if sys.conservative:
        return MechanicalSystem(
            leaf.chart, metric, potential=leaf.embedding.substitute(sys.potential)
        )
    return MechanicalSystem(
        leaf.chart, metric, work_form=PullbackForm(leaf.embedding, sys.work_form)
    )
