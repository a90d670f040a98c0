"""Second order fields built from mechanical data, covariant values, energies,
prolongations of vector fields and the variational identities

Sign convention: the work form alpha enters Newton's law as
i_D w2 + dT + alpha = 0, so the classical force covector is -alpha and
D_nabla = -grad alpha.
"""
import numpy as np

from .errors import ConfigError, ZeroTimeFormError
from .expr import new_tag, real_part, tangent_part
from .geometry import ExactForm, ExprForm, OneForm, TangentState, along

__all__ = [
    "MechanicalSystem",
    "SecondOrderField",
    "Variation",
    "kinetic_energy",
    "total_energy",
    "lagrangian",
    "geodesic_field",
    "free_field",
    "covariant_value",
    "force_of",
    "work_form_of",
    "directional_derivative",
    "energy_residual",
    "prolong",
    "zentral_residual",
    "hamilton_residual",
    "time_class_check",
]


class MechanicalSystem:
    """(M, T2, alpha): a chart, a metric and a work form"""

    def __init__(self, chart, metric, work_form=None, potential=None):
        """Create system

        Args:
            chart (Chart): Configuration space chart
            metric (MetricField): T2
            work_form (OneForm, optional): alpha, may depend on velocities. Defaults to the zero form.
            potential (str or Expr, optional): U, declares the system conservative with alpha = dU. Defaults to None.

        Raises:
            ConfigError: Both a work form and a potential, or mismatched charts
        """
        if work_form is not None and potential is not None:
            raise ConfigError("Give either a work form or a potential, not both")
        if metric.chart != chart:
            raise ConfigError(
                "The metric is written in %s but the system chart is %s" % (metric.chart, chart)
            )
        self.chart = chart
        self.metric = metric
        self.potential = None
        if potential is not None:
            work_form = ExactForm(chart, potential)
            self.potential = work_form.function
        elif work_form is None:
            work_form = ExprForm.zero(chart)
        if work_form.chart != chart:
            raise ConfigError("The work form is written in a different chart to the system")
        self.work_form = work_form

    @property
    def dim(self):
        return self.chart.dim

    @property
    def conservative(self):
        return self.potential is not None

    def with_work_form(self, work_form):
        """Same configuration space and metric, different work form"""
        return MechanicalSystem(self.chart, self.metric, work_form=work_form)

    def __str__(self):
        return "Mechanical system on %s with work form %s" % (self.chart, self.work_form)


class SecondOrderField:
    """A second order differential equation D = qdot^i d/dq^i + accel^i d/dqdot^i

    Only the accelerations are stored, the first half of the field is always
    the velocity, so the second order property holds by construction.
    """

    def __init__(self, chart, accel, kind):
        """Create field

        Args:
            chart (Chart): Chart of M
            accel (callable): TangentState -> numpy array of accelerations
            kind (str): Provenance (geodesic, free, constrained, time-constrained, time-dependent, transported...)
        """
        self.chart = chart
        self._accel = accel
        self.kind = kind

    def accel(self, state):
        """Accelerations qddot at a state

        Args:
            state (TangentState): Where to evaluate

        Returns:
            numpy array: qddot
        """
        return np.asarray(self._accel(state), dtype=float)

    def base(self, state):
        """The first half of the field, its projection to M, which is always qdot"""
        return state.qdot.copy()

    def vector(self, state):
        """Both halves of the field, (qdot, qddot)"""
        return self.base(state), self.accel(state)

    def __str__(self):
        return "%s field on %s" % (self.kind, self.chart)


class Variation:
    """The prolongation delta_v = a^i d/dq^i + adot^i d/dqdot^i of a vector field v"""

    def __init__(self, field):
        self.field = field

    def at(self, state):
        """Components of delta_v at a state

        adot^i = qdot^j da^i/dq^j exactly, i.e. Euler commutation holds by construction.

        Args:
            state (TangentState): Where to evaluate

        Returns:
            numpy array: a
            numpy array: adot
        """
        tag = new_tag()
        values = self.field.values(along(state.q, state.qdot, tag))
        a = np.array([float(real_part(v)) for v in values])
        adot = np.array([float(real_part(tangent_part(v, tag))) for v in values])
        return a, adot


def _kinetic(metric, q, qdot):
    m = metric.matrix(q)
    n = len(q)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total = total + m[i][j] * qdot[i] * qdot[j]
    return 0.5 * total


def kinetic_energy(sys, state):
    """T = 1/2 g_ij qdot^i qdot^j

    Args:
        sys (MechanicalSystem): System
        state (TangentState): State

    Returns:
        float: T
    """
    g = sys.metric.metric_at(state.q)
    return 0.5 * float(state.qdot @ g @ state.qdot)


def total_energy(sys, state):
    """The hamiltonian H = T + U of a conservative system

    Raises:
        ValueError: The system has no declared potential
    """
    if not sys.conservative:
        raise ValueError("The total energy is only defined for systems given by a potential")
    return kinetic_energy(sys, state) + sys.work_form.value(state.q)


def lagrangian(sys, state):
    """L = T - U of a conservative system"""
    if not sys.conservative:
        raise ValueError("The lagrangian is only defined for systems given by a potential")
    return kinetic_energy(sys, state) - sys.work_form.value(state.q)


def geodesic_field(sys):
    """The geodesic field qddot^l = -Gamma^l_ij qdot^i qdot^j of the system metric

    Args:
        sys (MechanicalSystem): System, its work form is ignored

    Returns:
        SecondOrderField: D_G
    """

    def accel(state):
        return -sys.metric.local(state.q).quadratic(state.qdot)

    return SecondOrderField(sys.chart, accel, "geodesic")


def _free_accel(sys, state, local=None):
    if local is None:
        local = sys.metric.local(state.q)
    return -local.quadratic(state.qdot) - local.ginv @ sys.work_form.at(state)


def free_field(sys):
    """The field of Newton's law i_D w2 + dT + alpha = 0 for the free system

    qddot^l = -Gamma^l_ij qdot^i qdot^j - g^lk A_k

    Args:
        sys (MechanicalSystem): System

    Returns:
        SecondOrderField: D
    """
    return SecondOrderField(sys.chart, lambda state: _free_accel(sys, state), "free")


def covariant_value(D, sys, state):
    """D_nabla^l = qddot^l + Gamma^l_ij qdot^i qdot^j

    Args:
        D (SecondOrderField): Field
        sys (MechanicalSystem): System giving the metric
        state (TangentState): State

    Returns:
        numpy array: The covariant value (the geometric representative of the force D - D_G)
    """
    return D.accel(state) + sys.metric.local(state.q).quadratic(state.qdot)


def force_of(D, sys, state):
    """The force D - D_G as an acceleration, accel(D) - accel(D_G)

    Equal to the covariant value, this is computed the other way round and is
    used to cross-check it.
    """
    return D.accel(state) - geodesic_field(sys).accel(state)


def work_form_of(D, sys, state):
    """The horizontal form alpha related to D, alpha_k = -g_lk(qddot^l + Gamma^l_ij qdot^i qdot^j)

    Returns:
        numpy array: Components A_k
    """
    local = sys.metric.local(state.q)
    return -local.g @ (D.accel(state) + local.quadratic(state.qdot))


def directional_derivative(D, f, state, accel=None):
    """Exact derivative Df of a function on TM along the field

    Args:
        D (SecondOrderField): Field
        f (callable): f(q, qdot) on lists, must accept Dual numbers
        state (TangentState): State
        accel (numpy array, optional): D.accel(state) if already known. Defaults to None.

    Returns:
        float: Df at state
    """
    if accel is None:
        accel = D.accel(state)
    tag = new_tag()
    value = f(along(state.q, state.qdot, tag), along(state.qdot, accel, tag))
    return float(real_part(tangent_part(value, tag)))


def energy_residual(D, sys, state):
    """DT + <alpha, D>, zero for a field obeying Newton's law with the system's alpha

    For constrained fields this is the power of the constraint forces, which
    vanishes on admissible states.

    Returns:
        float: Residual
    """
    dt = directional_derivative(D, lambda q, qdot: _kinetic(sys.metric, q, qdot), state)
    return dt + float(np.dot(sys.work_form.at(state), state.qdot))


def prolong(v):
    """Prolongs a vector field on M to the variation delta_v on TM

    Args:
        v (VectorField): Base field

    Returns:
        Variation: delta_v
    """
    return Variation(v)


def _liouville_pairing(sys, variation):
    def pairing(q, qdot):
        m = sys.metric.matrix(q)
        a = variation.field.values(q)
        n = len(q)
        total = 0.0
        for j in range(n):
            for k in range(n):
                total = total + m[j][k] * qdot[k] * a[j]
        return total

    return pairing


def _delta_kinetic(sys, variation, state):
    a, adot = variation.at(state)
    tag = new_tag()
    value = _kinetic(sys.metric, along(state.q, a, tag), along(state.qdot, adot, tag))
    return float(real_part(tangent_part(value, tag))), a


def zentral_residual(D, sys, delta, state):
    """D<theta, delta> - delta T + <alpha, delta>, which the Zentralgleichung says is 0

    theta = g_jk qdot^k dq^j is the Liouville form, alpha the work form of sys
    (D must be the field of sys for the identity to hold).

    Args:
        D (SecondOrderField): Field of sys
        sys (MechanicalSystem): System
        delta (Variation): A prolongation
        state (TangentState): State

    Returns:
        float: Residual
    """
    d_pairing = directional_derivative(D, _liouville_pairing(sys, delta), state)
    delta_t, a = _delta_kinetic(sys, delta, state)
    return d_pairing - delta_t + float(np.dot(sys.work_form.at(state), a))


def hamilton_residual(D, sys, delta, state):
    """D<theta, delta> - delta L for a conservative system, zero by Hamilton's principle in differential form

    Raises:
        ValueError: The system is not conservative
    """
    if not sys.conservative:
        raise ValueError("Hamilton's principle needs a system given by a potential")
    d_pairing = directional_derivative(D, _liouville_pairing(sys, delta), state)
    delta_t, a = _delta_kinetic(sys, delta, state)
    delta_u = float(np.dot(sys.work_form.at(state), a))
    return d_pairing - (delta_t - delta_u)


def time_class_check(tau, D, state):
    """tau_dot = <tau, D> = A_i qdot^i, which is 1 when tau is in the class of time at state

    Args:
        tau (OneForm): Horizontal form
        D (SecondOrderField): Any second order field (the pairing only sees its base projection)
        state (TangentState): State off the zero section

    Raises:
        ZeroTimeFormError: qdot = 0, the class of time is only defined off the zero section

    Returns:
        float: tau_dot
    """
    if not np.any(state.qdot):
        raise ZeroTimeFormError(
            "The class of time is only defined off the zero section, got qdot = 0 at q=%s"
            % list(state.q)
        )
    return float(np.dot(tau.at(state), D.base(state)))
