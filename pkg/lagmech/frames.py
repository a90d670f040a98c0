"""Reference frames: chart maps, pullback metrics and forms, transported fields,
inertial forces and the classification of one parameter groups of frames

A frame is a map phi from the chart of R to the chart of M given by
expressions, with a user supplied inverse. A group frame acts on R x M as
(t, a) -> (t, phi_t(a)).
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.stats import qmc

from .dynamics import MechanicalSystem, SecondOrderField, geodesic_field
from .errors import ConfigError, MathError, SingularJacobianError
from .expr import Dual, Var, diff, new_tag, parse, real_part, tangent_part
from .geometry import Chart, ExprForm, MetricField, OneForm, TangentState, along
from .timeconstraint import TimeForm, modified_field

__all__ = [
    "ChartMap",
    "Frame",
    "GroupFrame",
    "PullbackMetric",
    "PullbackForm",
    "ProductMetric",
    "SampleBox",
    "FrameClassification",
    "translation",
    "rotation",
    "dilatation",
    "BUILTIN_FRAMES",
    "pullback_metric",
    "pullback_form",
    "closed_form_pullback",
    "transported_field",
    "inertial_force",
    "congruence_defect",
    "classify_frame",
]

logger = logging.getLogger(__name__)

# Jacobians with a larger condition number are treated as singular
SINGULAR_CONDITION = 1e12


class ChartMap:
    """A smooth map between charts given by one expression per target coordinate,
    written in the source coordinates (the charts may have different dimensions)"""

    def __init__(self, source, target, exprs):
        """Create map

        Args:
            source (Chart): Chart the expressions are written in
            target (Chart): Chart of the image
            exprs (list): target.dim expressions

        Raises:
            ConfigError: Wrong number of expressions or unknown variables
        """
        if len(exprs) != target.dim:
            raise ConfigError(
                "A map into %s needs %s expressions, got %s" % (target, target.dim, len(exprs))
            )
        self.source = source
        self.target = target
        self.exprs = [parse(e) for e in exprs]
        for e in self.exprs:
            extra = e.variables - set(source.names)
            if extra:
                raise ConfigError(
                    "Map component '%s' uses %s, only the coordinates %s are bound"
                    % (e, sorted(extra), list(source.names))
                )

    def values(self, s):
        """phi(s), generic over Dual coordinates"""
        env = self.source.bind(s)
        return [e.eval(env) for e in self.exprs]

    def at(self, s):
        return np.array([float(real_part(v)) for v in self.values(s)])

    def jacobian(self, s):
        """Exact J[i, j] = d phi^i / d s^j

        Returns:
            numpy array: target.dim x source.dim
        """
        env = self.source.bind([float(v) for v in s])
        return np.array(
            [[float(real_part(diff(e, name, env))) for name in self.source.names] for e in self.exprs]
        ).reshape(self.target.dim, self.source.dim)

    def jacobian_values(self, s):
        """Jacobian entries generic over Dual coordinates, as nested lists"""
        env = self.source.bind(s)
        return [[diff(e, name, env) for name in self.source.names] for e in self.exprs]

    def hessian(self, s):
        """Exact H[i, j, k] = d2 phi^i / ds^j ds^k from nested dual numbers"""
        m, k = self.target.dim, self.source.dim
        hess = np.zeros((m, k, k))
        for j in range(k):
            tag = new_tag()
            seeded = [float(v) for v in s]
            seeded[j] = Dual(seeded[j], 1.0, tag)
            for i, row in enumerate(self.jacobian_values(seeded)):
                hess[i, j, :] = [float(real_part(tangent_part(x, tag))) for x in row]
        return hess

    def second_order(self, s, sdot):
        """phi(s), J sdot and sdot^T H sdot in one nested dual pass

        Returns:
            numpy array: phi(s)
            numpy array: J sdot
            numpy array: H(sdot, sdot)
        """
        inner = new_tag()
        outer = new_tag()
        seeded = along(along(s, sdot, inner), sdot, outer)
        values = self.values(seeded)
        phi = np.array([float(real_part(v)) for v in values])
        first = [tangent_part(v, outer) for v in values]
        velocity = np.array([float(real_part(x)) for x in first])
        curvature = np.array([float(real_part(tangent_part(x, inner))) for x in first])
        return phi, velocity, curvature

    def substitute(self, e):
        """An expression in the target coordinates rewritten in the source ones, e o phi"""
        return parse(e).substitute(dict(zip(self.target.names, self.exprs)))

    def compose(self, other):
        """self o other, where other maps into the source chart of self"""
        if other.target != self.source:
            raise ConfigError("Cannot compose %s -> %s after a map into %s" % (
                self.source, self.target, other.target))
        return ChartMap(other.source, self.target, [other.substitute(e) for e in self.exprs])

    def __str__(self):
        return "(%s) -> (%s)" % (", ".join(self.source.names), ", ".join(str(e) for e in self.exprs))


class Frame(ChartMap):
    """A diffeomorphism phi: R -> M with its inverse"""

    def __init__(self, source, target, forward, inverse):
        """Create frame

        Args:
            source (Chart): Chart of R
            target (Chart): Chart of M, same dimension
            forward (list): phi, target coordinates in terms of source coordinates
            inverse (list): phi^-1, source coordinates in terms of target coordinates
        """
        if source.dim != target.dim:
            raise ConfigError(
                "A frame maps between charts of the same dimension, got %s and %s" % (source, target)
            )
        super().__init__(source, target, forward)
        self.inverse = ChartMap(target, source, inverse)

    def inverse_defect(self, points):
        """max |phi(phi^-1(p)) - p| and |phi^-1(phi(s)) - s| over points of the source"""
        worst = 0.0
        for s in points:
            s = np.asarray(s, dtype=float)
            image = self.at(s)
            worst = max(worst, np.max(np.abs(self.inverse.at(image) - s)))
            worst = max(worst, np.max(np.abs(self.at(self.inverse.at(image)) - image)))
        return worst

    def check_inverse(self, points, tolerance=1e-8):
        """Raises ConfigError when the inverse does not invert phi at the points"""
        defect = self.inverse_defect(points)
        if defect > tolerance:
            raise ConfigError(
                "The inverse of the frame %s does not invert it, defect %.3g at the sample points"
                % (self, defect)
            )
        return defect

    def compose(self, other):
        """self o other as a Frame, other: R' -> R"""
        forward = ChartMap.compose(self, other)
        inverse = other.inverse.compose(self.inverse)
        return Frame(other.source, self.target, forward.exprs, inverse.exprs)


class GroupFrame(Frame):
    """A frame (t, a) -> (t, phi_t(a)) of R x M, t the first coordinate of the chart"""

    def __init__(self, chart, forward, inverse, name="group"):
        """Create group frame

        Args:
            chart (Chart): Chart (t, a^1..a^m) used on both sides
            forward (list): phi_t(a), m expressions (the t component is added)
            inverse (list): phi_t^-1(a), m expressions
            name (str, optional): Name for reports. Defaults to "group".
        """
        if chart.names[0] != "t":
            raise ConfigError("A group frame needs a chart whose first coordinate is t, got %s" % chart)
        super().__init__(chart, chart, [Var("t")] + list(forward), [Var("t")] + list(inverse))
        self.name = name
        self.space = Chart(chart.names[1:])

    def identity_defect(self, points):
        """max |phi_0(a) - a| over spatial points a"""
        return max(
            np.max(np.abs(self.at([0.0] + list(a))[1:] - np.asarray(a, dtype=float))) for a in points
        )

    def generator(self, a):
        """The infinitesimal generator u(a) = d phi_t(a)/dt at t = 0"""
        tag = new_tag()
        values = self.values([Dual(0.0, 1.0, tag)] + [float(x) for x in a])
        return np.array([float(real_part(tangent_part(v, tag))) for v in values[1:]])

    def __str__(self):
        return "%s frame %s" % (self.name, ChartMap.__str__(self))


def _number(x):
    return "(%r)" % float(x)


def _spatial(chart):
    if chart.names[0] != "t":
        raise ConfigError("Group frames act on a chart (t, ...), got %s" % chart)
    return list(chart.names[1:])


def translation(chart, direction):
    """(t, a) -> (t, a + t d)"""
    names = _spatial(chart)
    if len(direction) != len(names):
        raise ConfigError("A translation of %s needs a direction with %s entries" % (chart, len(names)))
    forward = ["%s + %s*t" % (x, _number(d)) for x, d in zip(names, direction)]
    inverse = ["%s - %s*t" % (x, _number(d)) for x, d in zip(names, direction)]
    return GroupFrame(chart, forward, inverse, "translation")


def rotation(chart, rate=1.0, plane=None):
    """Rotation at angular rate w in a coordinate plane, (x, y) -> (x cos wt - y sin wt, x sin wt + y cos wt)"""
    names = _spatial(chart)
    plane = plane or names[:2]
    if len(plane) != 2 or any(p not in names for p in plane):
        raise ConfigError("A rotation needs a plane of two coordinates among %s, got %s" % (names, plane))
    x, y = plane
    angle = "%s*t" % _number(rate)
    forward = list(names)
    inverse = list(names)
    forward[names.index(x)] = "%s*cos(%s) - %s*sin(%s)" % (x, angle, y, angle)
    forward[names.index(y)] = "%s*sin(%s) + %s*cos(%s)" % (x, angle, y, angle)
    inverse[names.index(x)] = "%s*cos(%s) + %s*sin(%s)" % (x, angle, y, angle)
    inverse[names.index(y)] = "%s*cos(%s) - %s*sin(%s)" % (y, angle, x, angle)
    return GroupFrame(chart, forward, inverse, "rotation")


def dilatation(chart, rate=1.0):
    """(t, a) -> (t, e^(ct) a)"""
    names = _spatial(chart)
    forward = ["%s*exp(%s*t)" % (x, _number(rate)) for x in names]
    inverse = ["%s*exp(%s*t)" % (x, _number(-rate)) for x in names]
    return GroupFrame(chart, forward, inverse, "dilatation")


BUILTIN_FRAMES = {"translation": translation, "rotation": rotation, "dilatation": dilatation}


class PullbackMetric(MetricField):
    """phi* g_bar = J^T g_bar(phi(q)) J, with exact derivatives through nested dual numbers"""

    def __init__(self, chart_map, metric):
        if metric.chart != chart_map.target:
            raise ConfigError("The metric is not written in the target chart of %s" % chart_map)
        super().__init__(chart_map.source)
        self.map = chart_map
        self.metric = metric

    def matrix(self, q):
        jac = self.map.jacobian_values(q)
        g = self.metric.matrix(self.map.values(q))
        m, k = self.map.target.dim, self.map.source.dim
        return [
            [
                sum(jac[a][i] * g[a][b] * jac[b][j] for a in range(m) for b in range(m))
                for j in range(k)
            ]
            for i in range(k)
        ]


class PullbackForm(OneForm):
    """phi* alpha_bar, the components J^T A_bar(phi(q), J qdot)"""

    def __init__(self, chart_map, form):
        if form.chart != chart_map.target:
            raise ConfigError("The form is not written in the target chart of %s" % chart_map)
        super().__init__(chart_map.source)
        self.map = chart_map
        self.form = form
        self.depends_on_velocity = form.depends_on_velocity

    def components(self, env):
        names = self.chart.names
        q = [env[name] for name in names]
        qdot = [env.get(name, 0.0) for name in self.chart.velocity_names]
        jac = self.map.jacobian_values(q)
        m, k = self.map.target.dim, self.map.source.dim
        velocity = [sum(jac[a][j] * qdot[j] for j in range(k)) for a in range(m)]
        bar = self.form.components(self.map.target.bind(self.map.values(q), velocity))
        return [sum(jac[a][j] * bar[a] for a in range(m)) for j in range(k)]

    def __str__(self):
        return "pullback of %s" % self.form


class ProductMetric(MetricField):
    """dt^2 + g on the chart (t, a^1..a^m)"""

    def __init__(self, space_metric):
        super().__init__(Chart(("t",) + space_metric.chart.names))
        self.space = space_metric

    def depends_on(self, k):
        return k > 0 and self.space.depends_on(k - 1)

    def matrix(self, q):
        g = self.space.matrix(list(q)[1:])
        n = self.dim
        rows = [[1.0] + [0.0] * (n - 1)]
        rows.extend([0.0] + list(row) for row in g)
        return rows


def pullback_metric(frame, metric):
    """The metric phi* g_bar on R

    Args:
        frame (ChartMap): phi
        metric (MetricField): g_bar on the target chart

    Returns:
        PullbackMetric: Evaluator of J^T g_bar J
    """
    return PullbackMetric(frame, metric)


def pullback_form(frame, form):
    """The form phi* alpha_bar on R"""
    return PullbackForm(frame, form)


def closed_form_pullback(frame, space_metric, q):
    """phi* (dt^2 + g) for a group frame from the generator u of the group

    g_tt = 1 + |u|^2, g_ta = (J_t^T g u)_a, g_ab = (J_t^T g J_t)_ab, with u and g
    taken at phi_t(a) and J_t the Jacobian of phi_t.

    Args:
        frame (GroupFrame): phi
        space_metric (MetricField): g on M
        q (sequence): (t, a)

    Returns:
        numpy array: Metric coefficients at q
    """
    image = frame.at(q)[1:]
    jac = frame.jacobian(q)[1:, 1:]
    g = space_metric.metric_at(image)
    u = frame.generator(image)
    n = len(q)
    out = np.zeros((n, n))
    out[0, 0] = 1.0 + u @ g @ u
    out[0, 1:] = out[1:, 0] = jac.T @ g @ u
    out[1:, 1:] = jac.T @ g @ jac
    return out


def _solve_jacobian(jac, rhs, q):
    condition = np.linalg.cond(jac)
    if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
        raise SingularJacobianError(
            "The frame Jacobian is singular at q={q} (condition number {c:.3g})".format(
                q=list(q), c=condition
            )
        )
    return scipy.linalg.solve(jac, rhs)


def transported_field(frame, field_bar):
    """The field D1 on R with phi_* D1 = D_bar

    accel1 = J^-1 (accel_bar(phi(q), J qdot) - H(qdot, qdot))

    Args:
        frame (Frame): phi
        field_bar (SecondOrderField): D_bar on M

    Returns:
        SecondOrderField: D1
    """

    def accel(state):
        image, velocity, curvature = frame.second_order(state.q, state.qdot)
        accel_bar = field_bar.accel(TangentState(image, velocity))
        return _solve_jacobian(frame.jacobian(state.q), accel_bar - curvature, state.q)

    return SecondOrderField(frame.source, accel, "transported")


def inertial_force(frame, metric, metric_bar, state):
    """The inertial force of phi: transported geodesic field of g_bar minus the geodesic field of g

    Args:
        frame (Frame): phi
        metric (MetricField): g on R
        metric_bar (MetricField): g_bar on M
        state (TangentState): State of R

    Returns:
        numpy array: n accelerations
    """
    transported = transported_field(frame, geodesic_field(MechanicalSystem(frame.target, metric_bar)))
    own = geodesic_field(MechanicalSystem(frame.source, metric))
    return transported.accel(state) - own.accel(state)


def _time_modified_field(sys):
    """Free field of sys made tangent to the levels of t_dot (tau = dt, first coordinate)"""
    return modified_field(sys, TimeForm.coordinate(sys.chart, sys.chart.names[0]))


def congruence_defect(frame, metric, form_bar, state, metric_bar=None):
    """Spatial components of the Newton residual of the transported field

    D_bar is the field of (M, g_bar, alpha_bar) modified to keep t_dot constant.
    Its transport D1 satisfies Newton's law modulo dt for (R, g, phi* alpha_bar)
    when the residual g D1_nabla + phi* alpha_bar has zero spatial components.

    Args:
        frame (GroupFrame): phi
        metric (MetricField): g on R
        form_bar (OneForm): alpha_bar on M
        state (TangentState): State of R with t_dot = 1
        metric_bar (MetricField, optional): g_bar on M. Defaults to metric.

    Returns:
        numpy array: The n - 1 spatial residual components
    """
    metric_bar = metric if metric_bar is None else metric_bar
    d_bar = _time_modified_field(MechanicalSystem(frame.target, metric_bar, work_form=form_bar))
    d1 = transported_field(frame, d_bar)
    local = metric.local(state.q)
    covariant = d1.accel(state) + local.quadratic(state.qdot)
    residual = local.g @ covariant + PullbackForm(frame, form_bar).at(state)
    return residual[1:]


@dataclass
class SampleBox:
    """Quasi random states with t_dot = 1 in a box of the chart

    Attributes:
        low (list): Lower corner, one entry per coordinate (t first)
        high (list): Upper corner
        speed (float): Spatial velocities are drawn from [-speed, speed]
        samples (int): Number of states
        seed (int): Seed of the scrambled Halton sequence
    """

    low: list
    high: list
    speed: float = 1.0
    samples: int = 64
    seed: int = 0

    def __post_init__(self):
        if len(self.low) != len(self.high):
            raise ConfigError("The sampling box corners have different lengths")
        if any(h < l for l, h in zip(self.low, self.high)):
            raise ConfigError("The sampling box needs low <= high, got %s and %s" % (self.low, self.high))
        if self.samples < 1:
            raise ConfigError("At least one sample is needed, got %s" % self.samples)

    def points(self):
        """samples points of the box"""
        n = len(self.low)
        unit = qmc.Halton(d=n, scramble=True, seed=self.seed).random(self.samples)
        low = np.array(self.low, dtype=float)
        return low + unit * (np.array(self.high, dtype=float) - low)

    def states(self, time_rate=1.0):
        """samples TangentStates, velocity of the first coordinate fixed to time_rate

        Pass time_rate=None to draw every velocity.
        """
        n = len(self.low)
        unit = qmc.Halton(d=2 * n, scramble=True, seed=self.seed).random(self.samples)
        span = np.array(self.high, dtype=float) - np.array(self.low, dtype=float)
        q = np.array(self.low, dtype=float) + unit[:, :n] * span
        qdot = self.speed * (2.0 * unit[:, n:] - 1.0)
        if time_rate is not None:
            qdot[:, 0] = time_rate
        return [TangentState(a, b) for a, b in zip(q, qdot)]


@dataclass
class FrameClassification:
    """Verdicts of classify_frame with their sample evidence

    Attributes:
        inertial (bool): The inertial force vanishes at every sample
        isometry_group (bool): Every sampled phi_t is an isometry of g
        preserves_equations (bool): Every sampled transported field satisfies Newton's law modulo dt
        theorem_agrees (bool): preserves_equations == (inertial and isometry_group)
        samples (int): Samples evaluated
        max_force (float): Largest inertial force seen
        max_metric_defect (float): Largest |phi_t* g - g|
        max_congruence (float): Largest spatial Newton residual
        failures (list): (location, message) of samples that could not be evaluated
    """

    inertial: bool
    isometry_group: bool
    preserves_equations: bool
    theorem_agrees: bool
    samples: int
    max_force: float
    max_metric_defect: float
    max_congruence: float
    failures: list = field(default_factory=list)

    def verdict(self):
        return {
            "inertial": self.inertial,
            "isometry_group": self.isometry_group,
            "preserves_equations": self.preserves_equations,
        }


def _random_forms(chart, count, rng):
    """Spatial work forms with affine coefficients, the first one zero"""
    names = chart.names[1:]
    forms = [ExprForm.zero(chart)]
    for _ in range(count - 1):
        comps = ["0"]
        for _ in names:
            coeffs = rng.uniform(-1.0, 1.0, len(names) + 1)
            comps.append(
                " + ".join([_number(coeffs[0])] + ["%s*%s" % (_number(c), x) for c, x in zip(coeffs[1:], names)])
            )
        forms.append(ExprForm(chart, comps))
    return forms


def classify_frame(frame, space_metric, box, tolerance=1e-7, forms=3, seed=0):
    """Decides by sampling whether a group frame is inertial, an isometry group and
    whether it preserves the equations of motion

    The last property is tested directly, the theorem saying it is equivalent to
    the other two is only used as a cross-check and a disagreement is warned
    about.

    Args:
        frame (GroupFrame): phi
        space_metric (MetricField): g on M, the metric on R x M is dt^2 + g
        box (SampleBox): Where to sample (t, a) and the spatial velocities
        tolerance (float, optional): Zero tolerance. Defaults to 1e-7.
        forms (int, optional): Work forms tried by the congruence test. Defaults to 3.
        seed (int, optional): Seed for the random work forms. Defaults to 0.

    Raises:
        MathError: No sample could be evaluated

    Returns:
        FrameClassification: Verdicts and evidence
    """
    product = ProductMetric(space_metric)
    pullback = PullbackMetric(frame, product)
    work_forms = _random_forms(frame.source, forms, np.random.default_rng(seed))
    max_force = max_defect = max_congruence = 0.0
    failures = []
    done = 0
    for state in box.states():
        try:
            force = inertial_force(frame, product, product, state)
            defect = pullback.metric_at(state.q)[1:, 1:] - space_metric.metric_at(state.q[1:])
            congruence = max(
                np.max(np.abs(congruence_defect(frame, product, form, state))) for form in work_forms
            )
        except MathError as exc:
            failures.append((list(state.q), str(exc)))
            continue
        done += 1
        max_force = max(max_force, float(np.max(np.abs(force))))
        max_defect = max(max_defect, float(np.max(np.abs(defect))))
        max_congruence = max(max_congruence, float(congruence))
    if done == 0:
        raise MathError(
            "No sample of the box could be evaluated, for example at %s: %s" % failures[0]
        )
    logger.debug("classified %s on %s samples, %s failures", frame, done, len(failures))
    inertial = max_force <= tolerance
    isometry = max_defect <= tolerance
    preserves = max_congruence <= tolerance
    agrees = preserves == (inertial and isometry)
    if not agrees:
        warnings.warn(
            "The sampled congruence test says preserves_equations=%s but inertial=%s and "
            "isometry_group=%s, this disagrees with the characterisation of frames that "
            "preserve the equations of motion" % (preserves, inertial, isometry)
        )
    return FrameClassification(
        inertial, isometry, preserves, agrees, done, max_force, max_defect, max_congruence, failures
    )
