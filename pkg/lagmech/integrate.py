"""Fixed step fourth order Runge-Kutta integration of second order fields,
with monitors evaluated at every node
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import kinetic_energy, total_energy
from .errors import IntegrationError, MathError
from .expr import evaluate, parse
from .geometry import TangentState

__all__ = [
    "Monitor",
    "Trajectory",
    "rk4_step",
    "estimate_error",
    "integrate",
    "kinetic_monitor",
    "energy_monitor",
    "constraint_monitors",
    "time_monitor",
    "level_monitors",
    "expression_monitor",
]

logger = logging.getLogger(__name__)


@dataclass
class Monitor:
    """A named function of the state recorded at every node"""

    name: str
    function: object

    def __call__(self, state):
        return float(self.function(state))


def kinetic_monitor(sys):
    return Monitor("T", lambda state: kinetic_energy(sys, state))


def energy_monitor(sys):
    """T + U, only for systems given by a potential"""
    return Monitor("H", lambda state: total_energy(sys, state))


def constraint_monitors(constraints):
    """beta_k_dot for each constraint, named beta1_dot, beta2_dot, .."""
    return [
        Monitor("beta%s_dot" % (k + 1), lambda state, form=form: form.dot(state))
        for k, form in enumerate(constraints)
    ]


def level_monitors(constraints):
    """B_k(q) for each constraint of a holonomic system, named B1, B2, .."""
    return [
        Monitor("B%s" % (k + 1), lambda state, form=form: form.value(state.q))
        for k, form in enumerate(constraints)
    ]


def time_monitor(tau):
    return Monitor("tau_dot", tau.dot)


def expression_monitor(chart, name, source):
    """A monitor given by an expression of the coordinates and velocities"""
    expr = parse(source)
    return Monitor(name, lambda state: evaluate(expr, chart.bind(state.q, state.qdot)))


@dataclass
class Trajectory:
    """Nodes of an integration

    Attributes:
        times (numpy array): t_0..t_N
        q (numpy array): Positions, one row per node
        qdot (numpy array): Velocities, one row per node
        monitors (dict): Monitor name -> values at the nodes
        projections (numpy array): Size of the velocity projection after each step (zeros when off)
        error (str): Why integration stopped early, None when it finished
    """

    times: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    monitors: dict = field(default_factory=dict)
    projections: np.ndarray = None
    error: str = None

    @property
    def completed(self):
        return self.error is None

    def __len__(self):
        return len(self.times)

    def state(self, k):
        return TangentState(self.q[k], self.qdot[k])

    @property
    def final(self):
        return self.state(len(self) - 1)

    def drift(self):
        """Monitor name -> max |m(t_k) - m(t_0)|"""
        return {
            name: float(np.max(np.abs(values - values[0]))) if len(values) else 0.0
            for name, values in self.monitors.items()
        }


def _derivative(D, q, qdot, state):
    try:
        accel = D.accel(TangentState(q, qdot))
    except ValueError as exc:
        raise IntegrationError(str(exc), last_state=state)
    if not np.all(np.isfinite(accel)):
        raise IntegrationError(
            "The %s gave a non finite acceleration %s at q=%s qdot=%s" % (D, accel, q, qdot),
            last_state=state,
        )
    return accel


def rk4_step(D, state, h):
    """One classical Runge-Kutta step of the first order system (q, qdot)' = (qdot, accel)

    Args:
        D (SecondOrderField): Field
        state (TangentState): Start
        h (float): Step, positive

    Raises:
        ValueError: h is not positive
        IntegrationError: The acceleration is not finite at a stage

    Returns:
        TangentState: State after the step
    """
    if not h > 0:
        raise ValueError("The integration step must be positive, got %s" % h)
    q, v = state.q, state.qdot
    a1 = _derivative(D, q, v, state)
    q2, v2 = q + 0.5 * h * v, v + 0.5 * h * a1
    a2 = _derivative(D, q2, v2, state)
    q3, v3 = q + 0.5 * h * v2, v + 0.5 * h * a2
    a3 = _derivative(D, q3, v3, state)
    q4, v4 = q + h * v3, v + h * a3
    a4 = _derivative(D, q4, v4, state)
    q_new = q + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    if not (np.all(np.isfinite(q_new)) and np.all(np.isfinite(v_new))):
        raise IntegrationError("The step from %s is not finite" % state, last_state=state)
    return TangentState(q_new, v_new)


def estimate_error(D, state, h):
    """Local error estimate from step doubling, |two half steps - one full step| / 15

    Returns:
        float: Estimated error of the two half steps
    """
    full = rk4_step(D, state, h)
    half = rk4_step(D, rk4_step(D, state, 0.5 * h), 0.5 * h)
    diff = np.concatenate([half.q - full.q, half.qdot - full.qdot])
    return float(np.max(np.abs(diff))) / 15.0


def _step_count(h, span):
    if not h > 0:
        raise ValueError("The integration step must be positive, got %s" % h)
    if span < 0:
        raise ValueError("The integration must end after it starts, got a span of %s" % span)
    steps = int(round(span / h))
    if abs(steps * h - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(
            "The step %s does not divide the span %s into a whole number of steps" % (h, span)
        )
    return steps


def integrate(D, state0, h, t_end, monitors=(), t0=0.0, project=None, drift_tolerance=None):
    """Integrates a field with fixed RK4 steps

    Args:
        D (SecondOrderField): Field
        state0 (TangentState): Initial state
        h (float): Step
        t_end (float): Final time, t_end - t0 must be a multiple of h
        monitors (iterable, optional): Monitor objects. Defaults to ().
        t0 (float, optional): Initial time. Defaults to 0.0.
        project (callable, optional): state -> (state, magnitude) applied after each step. Defaults to None.
        drift_tolerance (dict, optional): Monitor name -> drift above which a warning is given. Defaults to None.

    Returns:
        Trajectory: Nodes up to t_end, or up to the last good node if integration failed
    """
    steps = _step_count(h, t_end - t0)
    monitors = list(monitors)
    if project is not None:
        warnings.warn(
            "Velocity projection is enabled, drift off the admissible set is being corrected "
            "after every step and no longer shows integration error"
        )
    times = [t0]
    states = [state0]
    projections = [0.0]
    values = {m.name: [m(state0)] for m in monitors}
    error = None
    state = state0
    for k in range(1, steps + 1):
        try:
            state = rk4_step(D, state, h)
            moved = 0.0
            if project is not None:
                state, moved = project(state)
                logger.debug("step %s: velocity projection %.3g", k, moved)
            row = {m.name: m(state) for m in monitors}
        except MathError as exc:
            error = "integration stopped at t=%s: %s" % (times[-1], exc)
            logger.warning(error)
            break
        times.append(t0 + k * h)
        states.append(state)
        projections.append(moved)
        for name, value in row.items():
            values[name].append(value)
    trajectory = Trajectory(
        np.array(times),
        np.array([s.q for s in states]),
        np.array([s.qdot for s in states]),
        {name: np.array(v) for name, v in values.items()},
        np.array(projections),
        error,
    )
    if drift_tolerance:
        drift = trajectory.drift()
        for name, tolerance in drift_tolerance.items():
            if drift.get(name, 0.0) > tolerance:
                warnings.warn(
                    "Monitor %s drifted by %.3g, more than its tolerance %.3g"
                    % (name, drift[name], tolerance)
                )
    return trajectory
