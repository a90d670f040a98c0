"""Command line: derive, simulate, verify and frame subcommands on a system definition

Exit status is 0 on success, 1 for configuration errors, 2 for mathematical
errors (singular data, failed integration) and 3 when a verification fails.
"""
import argparse
import csv
import logging
import sys
from dataclasses import dataclass

import numpy as np

from .constraints import (
    admissible,
    constrained_field,
    covariant_decomposition,
    induced_system,
    orthonormal_field,
    project_velocity,
    solve_multipliers,
)
from .dynamics import (
    covariant_value,
    directional_derivative,
    energy_residual,
    free_field,
    prolong,
    zentral_residual,
)
from .errors import ConfigError, ExprSyntaxError, MathError
from .frames import (
    GroupFrame,
    classify_frame,
    closed_form_pullback,
    inertial_force,
    pullback_metric,
)
from .geometry import VectorField
from .integrate import integrate
from .config import load_config, parse_state
from .timeconstraint import (
    adapted_equations_check,
    congruence_residual,
    modified_field,
    time_dependent_field,
)

__all__ = ["Check", "main", "cmd_derive", "cmd_simulate", "cmd_verify", "cmd_frame", "run_checks"]

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_MATH = 2
EXIT_VERIFY = 3

# longest integration the verify checks run, in time units
VERIFY_HORIZON = 1.0


def _fmt(values):
    return "(%s)" % ", ".join("%.10g" % v for v in np.atleast_1d(values))


def _matrix(m, indent="    "):
    return "\n".join(indent + "  ".join("%14.10g" % v for v in row) for row in np.atleast_2d(m))


def cmd_derive(cfg, state, out):
    """Prints the metric, its Christoffel symbols and the accelerations of every applicable field at a state

    Args:
        cfg (SystemConfig): System
        state (TangentState): State
        out (file): Where to write
    """
    names = cfg.chart.names
    sys_ = cfg.system
    local = sys_.metric.local(state.q)
    print("system %s at %s" % (cfg.name, state), file=out)
    print("g =\n%s" % _matrix(local.g), file=out)
    print("g^-1 =\n%s" % _matrix(local.ginv), file=out)
    nonzero = [
        (l, i, j, local.gamma2[l, i, j])
        for l in range(cfg.chart.dim)
        for i in range(cfg.chart.dim)
        for j in range(i, cfg.chart.dim)
        if abs(local.gamma2[l, i, j]) > 1e-14
    ]
    if nonzero:
        print("Christoffel symbols (nonzero, i <= j):", file=out)
        for l, i, j, value in nonzero:
            print("    Gamma^%s_%s%s = %.10g" % (names[l], names[i], names[j], value), file=out)
    else:
        print("Christoffel symbols: all zero", file=out)
    free = free_field(sys_)
    print("free accel = %s" % _fmt(free.accel(state)), file=out)
    print("free covariant value = %s" % _fmt(covariant_value(free, sys_, state)), file=out)
    if cfg.constraints is not None:
        solution = solve_multipliers(sys_, cfg.constraints, state)
        d_bar = constrained_field(sys_, cfg.constraints)
        print("beta_dot = %s" % _fmt(admissible(cfg.constraints, state)), file=out)
        print("lambda = %s" % _fmt(solution.lambdas), file=out)
        print("constrained accel = %s" % _fmt(d_bar.accel(state)), file=out)
        print("constrained covariant value = %s" % _fmt(covariant_value(d_bar, sys_, state)), file=out)
    if cfg.time_form is not None:
        d_bar = modified_field(sys_, cfg.time_form)
        print("tau_dot = %.10g" % cfg.time_form.dot(state), file=out)
        print("time constrained accel = %s" % _fmt(d_bar.accel(state)), file=out)
        if cfg.constraints is not None:
            d_dep = time_dependent_field(sys_, cfg.time_dependent(), cfg.assume_definite)
            print("%s accel = %s" % (d_dep.kind, _fmt(d_dep.accel(state))), file=out)
    if cfg.frame is not None:
        transported = cfg.field("transported")
        print("transported accel = %s" % _fmt(transported.accel(state)), file=out)
        force = inertial_force(cfg.frame, cfg.metric, cfg.metric, state)
        print("inertial force = %s" % _fmt(force), file=out)


def cmd_simulate(cfg, out):
    """Integrates the field of the system and writes the trajectory as CSV

    Returns:
        Trajectory: The trajectory written
    """
    if cfg.integration is None:
        raise ConfigError("simulate needs an integration section")
    settings = cfg.integration
    monitors = cfg.monitors()
    trajectory = integrate(
        cfg.field(),
        settings["state"],
        settings["h"],
        settings["t_end"],
        monitors,
        t0=settings["t0"],
        project=cfg.projector(),
        drift_tolerance=settings["drift_tolerance"],
    )
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t"] + list(cfg.chart.names) + list(cfg.chart.velocity_names) + [m.name for m in monitors])
    for k in range(len(trajectory)):
        row = [trajectory.times[k]] + list(trajectory.q[k]) + list(trajectory.qdot[k])
        row += [trajectory.monitors[m.name][k] for m in monitors]
        writer.writerow([format(float(v), ".17g") for v in row])
    return trajectory


@dataclass
class Check:
    """One verified invariant"""

    name: str
    residual: float
    tolerance: float
    error: str = None

    @property
    def passed(self):
        return self.error is None and self.residual <= self.tolerance

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        if self.error is not None:
            return "%-32s %12s %10.1e  %s  %s" % (self.name, "-", self.tolerance, status, self.error)
        return "%-32s %12.3e %10.1e  %s" % (self.name, self.residual, self.tolerance, status)


def _admissible_forms(cfg):
    forms = list(cfg.constraints or [])
    targets = [0.0] * len(forms)
    if cfg.time_form is not None:
        forms.insert(0, cfg.time_form.form)
        targets.insert(0, 1.0)
    return forms, targets


def _samples(cfg):
    """Sample states of the box moved onto the admissible set"""
    forms, targets = _admissible_forms(cfg)
    states = []
    for state in cfg.sampling.states(time_rate=None):
        if forms:
            try:
                state, _ = project_velocity(cfg.system, forms, state, targets)
            except MathError as exc:
                # kept as drawn
                logger.debug("could not project sample %s: %s", state, exc)
        states.append(state)
    logger.debug("%s admissible samples", len(states))
    return states


def _rate_function(form, chart):
    def rate(q, qdot):
        comps = form.components(chart.bind(q, qdot))
        return sum(c * v for c, v in zip(comps, qdot))

    return rate


def _max_over(states, residual):
    worst = 0.0
    for state in states:
        worst = max(worst, float(np.max(np.abs(np.atleast_1d(residual(state))))))
    return worst


def _scaled(value, state):
    return value / (1.0 + float(np.dot(state.qdot, state.qdot)))


def _geometry_checks(cfg, states):
    sys_ = cfg.system
    free = free_field(sys_)

    def symmetry(state):
        gamma = sys_.metric.local(state.q).gamma2
        return gamma - np.transpose(gamma, (0, 2, 1))

    def compatibility(state):
        local = sys_.metric.local(state.q)
        g1 = local.gamma1
        return local.dg - (np.einsum("kij->ijk", g1) + np.einsum("kji->ijk", g1))

    def newton(state):
        local = sys_.metric.local(state.q)
        return covariant_value(free, sys_, state) + local.ginv @ sys_.work_form.at(state)

    def zentral(state):
        worst = 0.0
        for field in _variations(cfg):
            worst = max(worst, abs(zentral_residual(free, sys_, field, state)))
        return worst

    def commutation(state):
        worst = 0.0
        step = 1e-6
        for field in _variations(cfg):
            _, adot = field.at(state)
            ahead = field.field.at(state.q + step * state.qdot)
            behind = field.field.at(state.q - step * state.qdot)
            worst = max(worst, float(np.max(np.abs(adot - (ahead - behind) / (2 * step)))))
        return worst

    return [
        ("christoffel symmetry", 1e-12, symmetry),
        ("metric compatibility", 1e-8, compatibility),
        ("free field newton law", 1e-9, newton),
        ("energy balance", 1e-8, lambda s: _scaled(energy_residual(free, sys_, s), s)),
        ("zentral equation", 1e-8, zentral),
        ("euler commutation", 1e-6, commutation),
    ]


def _variations(cfg):
    names = cfg.chart.names
    fields = []
    for k in range(cfg.chart.dim):
        comps = ["0"] * cfg.chart.dim
        comps[k] = "1"
        fields.append(prolong(VectorField(cfg.chart, comps)))
    fields.append(prolong(VectorField(cfg.chart, list(names))))
    return fields


def _trajectory_defect(cfg, field_m, field_n, leaf):
    settings = cfg.integration
    state_n = leaf.lower(settings["state"])
    state_m = leaf.lift(state_n)
    horizon = min(settings["t_end"] - settings["t0"], VERIFY_HORIZON)
    h = settings["h"]
    horizon = h * int(round(horizon / h))
    on_m = integrate(field_m, state_m, h, settings["t0"] + horizon, t0=settings["t0"])
    on_n = integrate(field_n, state_n, h, settings["t0"] + horizon, t0=settings["t0"])
    if not (on_m.completed and on_n.completed):
        raise MathError(on_m.error or on_n.error)
    worst = 0.0
    for k in range(len(on_m)):
        lifted = leaf.lift(on_n.state(k))
        worst = max(
            worst,
            float(np.max(np.abs(lifted.q - on_m.q[k]))),
            float(np.max(np.abs(lifted.qdot - on_m.qdot[k]))),
        )
    return worst


def _constraint_checks(cfg, states):
    sys_ = cfg.system
    constraints = cfg.constraints
    d_bar = constrained_field(sys_, constraints)
    rates = [_rate_function(form, cfg.chart) for form in constraints]
    checks = [
        ("multiplier residual", 1e-10, lambda s: solve_multipliers(sys_, constraints, s).residual),
        (
            "constraint tangency",
            1e-8,
            lambda s: [_scaled(directional_derivative(d_bar, r, s), s) for r in rates],
        ),
        ("constraint forces do no work", 1e-8, lambda s: _scaled(energy_residual(d_bar, sys_, s), s)),
        (
            "orthonormal route",
            1e-9,
            lambda s: d_bar.accel(s) - orthonormal_field(sys_, constraints).accel(s),
        ),
        (
            "covariant decomposition",
            1e-8,
            lambda s: sum(covariant_decomposition(sys_, constraints, s)) - covariant_value(d_bar, sys_, s),
        ),
    ]
    checks = [(name, tol, fn, states) for name, tol, fn in checks]
    if cfg.integration is not None:

        def drift(_):
            settings = cfg.integration
            horizon = settings["h"] * int(round(min(settings["t_end"] - settings["t0"], VERIFY_HORIZON) / settings["h"]))
            start = settings["state"]
            trajectory = integrate(d_bar, start, settings["h"], settings["t0"] + horizon, t0=settings["t0"])
            if not trajectory.completed:
                raise MathError(trajectory.error)
            worst = max(
                float(np.max(np.abs(admissible(constraints, trajectory.state(k)))))
                for k in range(len(trajectory))
            )
            if constraints.is_holonomic:
                start_levels = constraints.levels(start.q)
                for k in range(len(trajectory)):
                    worst = max(worst, float(np.max(np.abs(constraints.levels(trajectory.q[k]) - start_levels))))
            return worst

        checks.append(("constraint drift", 1e-6, drift, None))
        if cfg.leaf is not None:
            induced = induced_system(sys_, cfg.leaf)
            checks.append(
                (
                    "leaf specialization",
                    1e-6,
                    lambda _: _trajectory_defect(cfg, d_bar, free_field(induced), cfg.leaf),
                    None,
                )
            )
    return checks


def _time_checks(cfg, states):
    sys_ = cfg.system
    tau = cfg.time_form
    checks = []
    if cfg.constraints is not None:
        tc = cfg.time_dependent()
        d_bar = time_dependent_field(sys_, tc, cfg.assume_definite)
        forms = tc.forms
        modulo = tc
    else:
        d_bar = modified_field(sys_, tau)
        forms = [tau.form]
        modulo = tau
    rates = [_rate_function(form, cfg.chart) for form in forms]
    checks.append(
        (
            "time level tangency",
            1e-9,
            lambda s: [_scaled(directional_derivative(d_bar, r, s), s) for r in rates],
            states,
        )
    )
    checks.append(
        ("congruence modulo tau", 1e-9, lambda s: _scaled(congruence_residual(d_bar, sys_, modulo, s), s), states)
    )
    if not tau.is_exact:
        checks.append(("time form closed", 1e-9, lambda _: tau.verify_closed(cfg.sampling.points()), None))
    if tau.coordinate_index() == 0 and cfg.constraints is None:
        checks.append(
            ("adapted equations", 1e-8, lambda s: _scaled(adapted_equations_check(sys_, tau, s), s), states)
        )
    if cfg.leaf is not None and cfg.leaf_time_form is not None and cfg.integration is not None:
        induced = induced_system(sys_, cfg.leaf)
        checks.append(
            (
                "leaf specialization",
                1e-6,
                lambda _: _trajectory_defect(
                    cfg, d_bar, modified_field(induced, cfg.leaf_time_form), cfg.leaf
                ),
                None,
            )
        )
    return checks


def _frame_checks(cfg):
    frame = cfg.frame
    points = cfg.sampling.points()
    checks = [("frame inverse", 1e-8, lambda _: frame.inverse_defect(points), None)]
    if isinstance(frame, GroupFrame) and cfg.space_metric is not None:
        pullback = pullback_metric(frame, cfg.metric)
        checks.append(
            ("group identity", 1e-8, lambda _: frame.identity_defect([p[1:] for p in points]), None)
        )
        checks.append(
            (
                "pullback closed form",
                1e-9,
                lambda _: max(
                    float(np.max(np.abs(pullback.metric_at(p) - closed_form_pullback(frame, cfg.space_metric, p))))
                    for p in points
                ),
                None,
            )
        )

        def theorem(_):
            result = classify_frame(
                frame, cfg.space_metric, cfg.sampling, cfg.tolerance, cfg.congruence_forms
            )
            return 0.0 if result.theorem_agrees else 1.0

        checks.append(("classification cross-check", 0.5, theorem, None))
    return checks


def run_checks(cfg):
    """Runs every invariant that applies to the system

    Returns:
        list: Check objects
    """
    states = _samples(cfg)
    planned = [(name, tol, fn, states) for name, tol, fn in _geometry_checks(cfg, states)]
    if cfg.constraints is not None and cfg.time_form is None:
        planned.extend(_constraint_checks(cfg, states))
    if cfg.time_form is not None:
        planned.extend(_time_checks(cfg, states))
    if cfg.frame is not None:
        planned.extend(_frame_checks(cfg))
    results = []
    for name, tolerance, residual, where in planned:
        try:
            if where is None:
                value = float(np.max(np.abs(np.atleast_1d(residual(None)))))
            else:
                value = _max_over(where, residual)
            results.append(Check(name, value, tolerance))
        except MathError as exc:
            results.append(Check(name, float("nan"), tolerance, "%s: %s" % (type(exc).__name__, exc)))
        logger.debug("check %s done", name)
    return results


def cmd_verify(cfg, out):
    """Prints one line per invariant and returns whether all passed"""
    checks = run_checks(cfg)
    print("%-32s %12s %10s  %s" % ("check", "residual", "tolerance", "result"), file=out)
    for check in checks:
        print(check.line(), file=out)
    failed = [c for c in checks if not c.passed]
    print("%s checks, %s failed" % (len(checks), len(failed)), file=out)
    return not failed


def cmd_frame(cfg, out, shown=3):
    """Prints the pullback metric and inertial force at a few samples and the classification"""
    frame = cfg.frame
    if frame is None:
        raise ConfigError("frame needs a frame section")
    if not isinstance(frame, GroupFrame) or cfg.space_metric is None:
        raise ConfigError("frame classifies group frames of a chart (t, ...) with metric dt^2 + g")
    pullback = pullback_metric(frame, cfg.metric)
    print("frame %s" % frame, file=out)
    for state in cfg.sampling.states()[:shown]:
        print("at %s" % state, file=out)
        print("  pullback metric =\n%s" % _matrix(pullback.metric_at(state.q), "    "), file=out)
        force = inertial_force(frame, cfg.metric, cfg.metric, state)
        print("  inertial force = %s" % _fmt(force), file=out)
    result = classify_frame(frame, cfg.space_metric, cfg.sampling, cfg.tolerance, cfg.congruence_forms)
    print("samples: %s evaluated, %s failed" % (result.samples, len(result.failures)), file=out)
    for location, message in result.failures:
        print("  failed at %s: %s" % (location, message), file=out)
    print("max inertial force: %.3e" % result.max_force, file=out)
    print("max metric change: %.3e" % result.max_metric_defect, file=out)
    print("max congruence residual: %.3e" % result.max_congruence, file=out)
    for key, value in result.verdict().items():
        print("%s: %s" % (key, "true" if value else "false"), file=out)
    if not result.theorem_agrees:
        print("WARNING: the sampled verdict disagrees with inertial and isometry_group", file=out)
    return result


def _parser():
    parser = argparse.ArgumentParser(
        prog="lagmech",
        description="Equations of motion of free, constrained and time constrained mechanical "
        "systems, and the inertial forces of reference frames",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    derive = sub.add_parser("derive", help="Metric, Christoffel symbols and accelerations at a state")
    derive.add_argument("--config", required=True, help="System file or gallery name")
    derive.add_argument("--state", help='State as "q1,..,qn; qdot1,..,qdotn", defaults to the initial state')
    simulate = sub.add_parser("simulate", help="Integrate and write the trajectory as CSV")
    simulate.add_argument("--config", required=True, help="System file or gallery name")
    simulate.add_argument("--output", "-o", help="CSV file, defaults to standard output")
    verify = sub.add_parser("verify", help="Check the invariants that apply to the system")
    verify.add_argument("--config", required=True, help="System file or gallery name")
    frame = sub.add_parser("frame", help="Classify the frame of the system")
    frame.add_argument("--config", required=True, help="System file or gallery name")
    return parser


def main(argv=None, out=None):
    """Runs the command line

    Args:
        argv (list, optional): Arguments. Defaults to sys.argv[1:].
        out (file, optional): Output stream. Defaults to sys.stdout.

    Returns:
        int: Exit status
    """
    args = _parser().parse_args(argv)
    out = sys.stdout if out is None else out
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "derive":
            if args.state:
                state = parse_state(args.state, cfg.chart.dim)
            elif cfg.integration is not None:
                state = cfg.integration["state"]
            else:
                raise ConfigError("derive needs --state or an integration section with a state")
            cmd_derive(cfg, state, out)
        elif args.command == "simulate":
            if args.output:
                with open(args.output, "w", newline="") as f:
                    trajectory = cmd_simulate(cfg, f)
            else:
                trajectory = cmd_simulate(cfg, out)
            if not trajectory.completed:
                print("error: %s" % trajectory.error, file=sys.stderr)
                return EXIT_MATH
        elif args.command == "verify":
            if not cmd_verify(cfg, out):
                return EXIT_VERIFY
        elif args.command == "frame":
            cmd_frame(cfg, out)
    except (ConfigError, ExprSyntaxError) as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except MathError as exc:
        print("math error: %s" % exc, file=sys.stderr)
        return EXIT_MATH
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    return 0
