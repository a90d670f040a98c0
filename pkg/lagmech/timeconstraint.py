"""Time constraints tau_dot = 1 for a closed, nowhere zero 1-form tau, the
modified field tangent to every level tau_dot = c, and linear constraints that
depend on time
"""
import warnings
from dataclasses import dataclass

import numpy as np

from .constraints import (
    ConstraintSystem,
    _form_matrix,
    _multipliers,
    _require_positive,
    _solve_gram,
    constrained_field,
)
from .dynamics import SecondOrderField, _free_accel
from .errors import (
    ConfigError,
    IsotropicTimeFormError,
    ZeroTimeFormError,
)
from .expr import parse
from .geometry import ExactForm, ExprForm

__all__ = [
    "TimeForm",
    "TimeDependentConstraints",
    "DisplacementVerdict",
    "modified_field",
    "adapted_equations_check",
    "admissible_displacement",
    "time_dependent_field",
    "congruence_residual",
    "holonomic_limit_difference",
]

# |<grad tau, grad tau>| at or below this is isotropic
ISOTROPIC_TOLERANCE = 1e-12


class TimeForm:
    """A closed 1-form tau without zeros, either exact (tau = df) or checked closed by sampling"""

    def __init__(self, chart, form, function=None):
        """Create time form

        Args:
            chart (Chart): Chart of M
            form (OneForm or list): tau, or its component expressions
            function (str or Expr, optional): f with tau = df, skips the closedness check. Defaults to None.

        Raises:
            ConfigError: tau depends on velocities
        """
        if isinstance(form, (list, tuple)):
            form = ExprForm(chart, form)
        if form.depends_on_velocity:
            raise ConfigError("A time form must have components depending on q only, got %s" % form)
        self.chart = chart
        self.form = form
        self.function = None if function is None else parse(function)
        self.closed_verified = function is not None

    @classmethod
    def exact(cls, chart, function):
        """tau = df"""
        form = ExactForm(chart, function)
        return cls(chart, form, function=form.function)

    @classmethod
    def coordinate(cls, chart, name):
        """tau = dq for a coordinate q of the chart"""
        if name not in chart.names:
            raise ConfigError(
                "'d%s' is not a time form of %s, %s is not a coordinate" % (name, chart, name)
            )
        return cls.exact(chart, name)

    def coordinate_index(self):
        """Index k when tau = dq^k is a coordinate differential, else None"""
        if self.function is None:
            return None
        name = str(self.function)
        return self.chart.index(name) if name in self.chart.names else None

    @property
    def is_exact(self):
        return self.function is not None

    def verify_closed(self, points, tolerance=1e-9):
        """Checks dA_i/dq^j = dA_j/dq^i at sample points

        Args:
            points (iterable): Points of the chart
            tolerance (float, optional): Largest asymmetry accepted. Defaults to 1e-9.

        Raises:
            ConfigError: tau is not closed at some point

        Returns:
            float: Largest asymmetry found
        """
        worst = 0.0
        for q in points:
            jac = self.form.jacobian(q)
            asymmetry = float(np.max(np.abs(jac - jac.T)))
            if asymmetry > tolerance:
                raise ConfigError(
                    "The time form %s is not closed: at q=%s dA/dq is not symmetric (defect %.3g)"
                    % (self.form, list(q), asymmetry)
                )
            worst = max(worst, asymmetry)
        self.closed_verified = True
        return worst

    def at_point(self, q):
        """Components of tau at q

        Raises:
            ZeroTimeFormError: Every component vanishes at q
        """
        values = self.form.at_point(q)
        if not np.any(values):
            raise ZeroTimeFormError("The time form %s vanishes at q=%s" % (self.form, list(q)))
        return values

    def dot(self, state):
        """tau_dot = A_i qdot^i"""
        return float(np.dot(self.at_point(state.q), state.qdot))

    def __str__(self):
        return str(self.form)


class TimeDependentConstraints:
    """A time form tau together with linear constraints Lambda_M, tau independent of Lambda_M"""

    def __init__(self, time_form, constraints):
        if time_form.chart != constraints.chart:
            raise ConfigError("The time form and the constraints are written in different charts")
        if len(constraints) + 1 >= time_form.chart.dim:
            raise ConfigError(
                "A time form and %s constraints leave no motion on %s" % (len(constraints), time_form.chart)
            )
        self.time_form = time_form
        self.constraints = constraints

    @property
    def forms(self):
        """tau followed by the constraint forms"""
        return [self.time_form.form] + list(self.constraints)

    def admissible(self, state):
        """(tau_dot - 1, beta_1_dot, .., beta_r_dot), zero on the admissible set"""
        b = _form_matrix(self.forms, self.time_form.chart, state)
        values = b @ state.qdot
        values[0] -= 1.0
        return values

    def check_independent(self, metric, state):
        """Raises DependentConstraintsError when tau lies in the span of the constraints at state.q"""
        b = _form_matrix(self.forms, self.time_form.chart, state)
        gram = b @ metric.inverse_at(state.q) @ b.T
        _solve_gram(gram, np.zeros(len(gram)), state, "time form and constraint forms")


def _require_closed(tau):
    if not tau.closed_verified:
        raise ConfigError(
            "The time form %s is neither exact nor checked closed, run verify_closed on sample "
            "points before building a field from it" % tau
        )


def _time_gradient(local, tau, state):
    values = tau.at_point(state.q)
    grad = local.ginv @ values
    norm = float(values @ grad)
    if abs(norm) <= ISOTROPIC_TOLERANCE:
        raise IsotropicTimeFormError(
            "grad tau is isotropic at q=%s (<grad tau, grad tau> = %.3g), the modified field "
            "is not defined there" % (list(state.q), norm)
        )
    return values, grad, norm


def modified_field(sys, tau):
    """D_bar = D - (D tau_dot / <grad tau, grad tau>) grad tau, tangent to every level tau_dot = c

    Args:
        sys (MechanicalSystem): System, D is its free field
        tau (TimeForm): Time form

    Raises:
        ConfigError: tau is neither exact nor checked closed

    Returns:
        SecondOrderField: D_bar
    """
    _require_closed(tau)

    def accel(state):
        local = sys.metric.local(state.q)
        free = _free_accel(sys, state, local)
        values, grad, norm = _time_gradient(local, tau, state)
        rate = float(tau.form.jacobian(state.q) @ state.qdot @ state.qdot) + float(values @ free)
        return free - (rate / norm) * grad

    return SecondOrderField(sys.chart, accel, "time-constrained")


def adapted_equations_check(sys, tau, state):
    """Residuals of the equations on the level q0_dot = c in coordinates adapted to tau = dq0

    g_mn qddot^n + Gamma_sn,m qdot^s qdot^n + 2c Gamma_n0,m qdot^n + c^2 Gamma_00,m + A_m = 0
    for the spatial indices m, n, s, with qddot taken from the modified field.

    Args:
        sys (MechanicalSystem): System
        tau (TimeForm): Must be dq0 for the first coordinate q0
        state (TangentState): State, c = q0_dot

    Raises:
        ConfigError: tau is not dq0

    Returns:
        numpy array: n - 1 residuals
    """
    if tau.coordinate_index() != 0:
        raise ConfigError(
            "The adapted equations need tau = d%s (the first coordinate), got %s"
            % (sys.chart.names[0], tau)
        )
    accel = modified_field(sys, tau).accel(state)
    local = sys.metric.local(state.q)
    c = state.qdot[0]
    v = state.qdot[1:]
    gamma = local.gamma1
    alpha = sys.work_form.at(state)
    residual = (
        local.g[1:, 1:] @ accel[1:]
        + np.einsum("snm,s,n->m", gamma[1:, 1:, 1:], v, v)
        + 2.0 * c * np.einsum("nm,n->m", gamma[1:, 0, 1:], v)
        + c * c * gamma[0, 0, 1:]
        + alpha[1:]
    )
    return residual


def holonomic_limit_difference(sys, tau, state):
    """Largest difference between the modified field and the field of the holonomic
    constraint {tau} at a state on the level tau_dot = 0"""
    constraints = ConstraintSystem(sys.chart, [tau.form])
    held = constrained_field(sys, constraints).accel(state)
    return float(np.max(np.abs(modified_field(sys, tau).accel(state) - held)))


@dataclass
class DisplacementVerdict:
    """<tau, v> at the sample points and what it says about v

    kind is "admissible" (<tau, v> = 0), "tangent" (a nonzero constant) or
    "not tangent" (not constant).
    """

    values: np.ndarray
    kind: str

    @property
    def admissible(self):
        return self.kind == "admissible"

    @property
    def tangent(self):
        return self.kind != "not tangent"


def admissible_displacement(tau, v, points, tolerance=1e-9):
    """Classifies a vector field as an infinitesimal displacement of the time constrained system

    Args:
        tau (TimeForm): Time form
        v (VectorField): Displacement field
        points (iterable): Sample points
        tolerance (float, optional): Zero and constancy tolerance. Defaults to 1e-9.

    Returns:
        DisplacementVerdict: Values and classification
    """
    values = np.array([float(tau.form.at_point(q) @ v.at(q)) for q in points])
    if np.max(np.abs(values)) <= tolerance:
        kind = "admissible"
    elif np.max(values) - np.min(values) <= tolerance * (1.0 + np.max(np.abs(values))):
        kind = "tangent"
    else:
        kind = "not tangent"
    return DisplacementVerdict(values, kind)


def time_dependent_field(sys, tc, assume_definite=False):
    """D_bar = D + sum_k lambda^k V_k over tau and the constraint forms, with
    D_bar tau_dot = D_bar beta_k_dot = 0

    Args:
        sys (MechanicalSystem): System
        tc (TimeDependentConstraints): Time form and constraints
        assume_definite (bool, optional): Accept an indefinite metric, asserting T2 is definite on the
            admissible distribution and on its orthogonal complement. Defaults to False.

    Raises:
        IndefiniteMetricError: The metric is indefinite and definiteness was not asserted
        ConfigError: The time form is neither exact nor checked closed

    Returns:
        SecondOrderField: D_bar
    """
    _require_closed(tc.time_form)
    kind = "time-dependent"
    if assume_definite:
        kind = "time-dependent (definiteness asserted)"
        warnings.warn(
            "Accepting indefinite metrics for the time dependent field on the assertion that T2 "
            "is definite on the admissible distribution and its orthogonal complement"
        )

    def accel(state):
        local = sys.metric.local(state.q)
        if not assume_definite:
            _require_positive(local.g, state.q)
        tc.time_form.at_point(state.q)
        free = _free_accel(sys, state, local)
        solution = _multipliers(
            local, tc.forms, sys.chart, state, free, "time form and constraint forms"
        )
        return free + solution.force()

    return SecondOrderField(sys.chart, accel, kind)


def congruence_residual(D, sys, forms, state):
    """The residual 1-form alpha - alpha_D = A + g D_nabla with its component along
    the span of forms removed

    Zero when D satisfies Newton's law for sys modulo the forms (tau, or tau and
    the constraints).

    Args:
        D (SecondOrderField): Field
        sys (MechanicalSystem): System
        forms (TimeForm, TimeDependentConstraints or list of OneForm): Forms to work modulo
        state (TangentState): State

    Returns:
        numpy array: n components of the remainder
    """
    if isinstance(forms, TimeForm):
        forms = [forms.form]
    elif isinstance(forms, TimeDependentConstraints):
        forms = forms.forms
    local = sys.metric.local(state.q)
    residual = sys.work_form.at(state) + local.g @ (D.accel(state) + local.quadratic(state.qdot))
    b = _form_matrix(list(forms), sys.chart, state)
    gram = b @ local.ginv @ b.T
    coeffs, _ = _solve_gram(gram, b @ local.ginv @ residual, state)
    return residual - b.T @ coeffs
