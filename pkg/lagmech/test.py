import io
import math
import os
import tempfile
import unittest
import warnings

import numpy as np

from .cli import cmd_simulate, main, run_checks
from .config import SystemConfig, gallery_names, load_config, parse_config, parse_state, read_sections
from .constraints import (
    ConstraintSystem,
    Leaf,
    admissible,
    constrained_field,
    covariant_decomposition,
    gram_matrix,
    induced_system,
    orthonormal_field,
    project_velocity,
    solve_multipliers,
)
from .dynamics import (
    MechanicalSystem,
    SecondOrderField,
    covariant_value,
    directional_derivative,
    energy_residual,
    force_of,
    free_field,
    geodesic_field,
    hamilton_residual,
    kinetic_energy,
    prolong,
    time_class_check,
    total_energy,
    work_form_of,
    zentral_residual,
)
from .errors import (
    ConfigError,
    DegenerateMetricError,
    DependentConstraintsError,
    DomainError,
    ExprSyntaxError,
    InadmissibleStateError,
    IndefiniteMetricError,
    IsotropicTimeFormError,
    SingularJacobianError,
    UnboundVariableError,
    ZeroTimeFormError,
)
from .expr import diff, evaluate, gradient, new_tag, parse, real_part, seed, tangent_part
from .frames import (
    ChartMap,
    Frame,
    SampleBox,
    classify_frame,
    closed_form_pullback,
    dilatation,
    inertial_force,
    pullback_form,
    pullback_metric,
    rotation,
    transported_field,
    translation,
)
from .geometry import (
    Chart,
    ExactForm,
    ExprForm,
    ExprMetric,
    TangentState,
    VectorField,
    christoffel,
    grad_form,
    second_fundamental_form,
)
from .integrate import (
    constraint_monitors,
    energy_monitor,
    estimate_error,
    expression_monitor,
    integrate,
    kinetic_monitor,
    time_monitor,
)
from .timeconstraint import (
    TimeDependentConstraints,
    TimeForm,
    adapted_equations_check,
    admissible_displacement,
    congruence_residual,
    holonomic_limit_difference,
    modified_field,
    time_dependent_field,
)

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


def euclidean(*names):
    chart = Chart(names)
    return chart, ExprMetric.euclidean(chart)


def number(x):
    return "(%r)" % float(x)


def random_poly(rng, names, scale=1.0):
    """Quadratic polynomial with coefficients in [-scale, scale]"""
    terms = [number(rng.uniform(-scale, scale))]
    for name in names:
        terms.append("%s*%s" % (number(rng.uniform(-scale, scale)), name))
        terms.append("%s*%s^2" % (number(rng.uniform(-scale, scale)), name))
    if len(names) > 1:
        terms.append("%s*%s*%s" % (number(rng.uniform(-scale, scale)), names[0], names[1]))
    return " + ".join(terms)


def random_metric(rng, chart):
    """Positive definite on [-1, 1]^n: diagonally dominant lower triangle"""
    n = chart.dim
    rows = []
    for i in range(n):
        row = [random_poly(rng, chart.names, 0.1) for _ in range(i)]
        row.append("%s + %s" % (number(2.0 + n), random_poly(rng, chart.names, 0.1)))
        rows.append(row)
    return ExprMetric.from_lower(chart, rows)


def random_state(rng, n, low=-1.0, high=1.0, speed=1.0):
    return TangentState(rng.uniform(low, high, n), rng.uniform(-speed, speed, n))


def finite_christoffel(metric, q, h=1e-6):
    q = np.asarray(q, dtype=float)
    n = len(q)
    dg = np.zeros((n, n, n))
    for k in range(n):
        step = np.zeros(n)
        step[k] = h
        dg[:, :, k] = (metric.metric_at(q + step) - metric.metric_at(q - step)) / (2 * h)
    gamma1 = 0.5 * (np.einsum("ikj->ijk", dg) + np.einsum("jki->ijk", dg) - dg)
    return np.einsum("lk,ijk->lij", np.linalg.inv(metric.metric_at(q)), gamma1)


def sphere():
    chart, metric = euclidean("x", "y", "z")
    sys = MechanicalSystem(chart, metric)
    return sys, ConstraintSystem.holonomic(chart, ["sqrt(x^2 + y^2 + z^2)"])


def tangent_to_sphere(rng):
    q = rng.uniform(-1.0, 1.0, 3)
    q[0] += 2.0
    v = rng.uniform(-1.0, 1.0, 3)
    v -= (v @ q) / (q @ q) * q
    return TangentState(q, v)


class TestExpr(unittest.TestCase):
    def test_evaluate(self):
        self.assertEqual(evaluate(parse("0"), {}), 0.0)
        self.assertEqual(evaluate(parse("x^2 + y^2"), {"x": 1.0, "y": 2.0}), 5.0)
        self.assertEqual(evaluate(parse("1 + x^2 + y^2"), {"x": 1.0, "y": 2.0}), 6.0)
        self.assertEqual(evaluate(parse("sin(0)"), {}), 0.0)
        self.assertEqual(evaluate(parse("exp(2*t)"), {"t": 0.0}), 1.0)
        self.assertAlmostEqual(
            evaluate(parse("exp(2*t)*(x^2+y^2)"), {"t": 0.0, "x": 3.0, "y": 4.0}), 25.0, places=12
        )
        self.assertAlmostEqual(evaluate(parse("atan2(1, 1)"), {}), math.pi / 4, places=15)

    def test_precedence(self):
        self.assertEqual(evaluate(parse("-x^2"), {"x": 2.0}), -4.0)
        self.assertEqual(evaluate(parse("2^-1"), {}), 0.5)
        self.assertEqual(evaluate(parse("2^3^2"), {}), 512.0)
        self.assertEqual(evaluate(parse("1 - 2 - 3"), {}), -4.0)
        self.assertEqual(evaluate(parse("8 / 4 / 2"), {}), 1.0)
        self.assertEqual(evaluate(parse("2*x_dot"), {"x_dot": 1.5}), 3.0)

    def test_syntax_errors(self):
        for source in ["x +", "(x", "2 $ 3", "sine(x)", "atan2(x)", "x y"]:
            with self.assertRaises(ExprSyntaxError):
                parse(source)
        with self.assertRaises(ExprSyntaxError) as caught:
            parse("x + * y")
        self.assertEqual(caught.exception.position, 4)

    def test_math_errors(self):
        with self.assertRaises(DomainError):
            evaluate(parse("log(x)"), {"x": 0.0})
        with self.assertRaises(DomainError):
            evaluate(parse("1/x"), {"x": 0.0})
        with self.assertRaises(DomainError):
            evaluate(parse("sqrt(x)"), {"x": -1.0})
        with self.assertRaises(UnboundVariableError):
            evaluate(parse("x + y"), {"x": 1.0})

    def test_diff(self):
        self.assertEqual(diff(parse("x^2"), "x", {"x": 3.0}), 6.0)
        self.assertEqual(diff(parse("7"), "x", {"x": 3.0}), 0.0)
        self.assertEqual(diff(parse("r^2"), "r", {"r": 2.0}), 4.0)
        self.assertAlmostEqual(diff(parse("atan2(y, x)"), "x", {"x": 1.0, "y": 1.0}), -0.5, places=15)
        self.assertEqual(gradient(parse("x*y"), ["x", "y"], {"x": 2.0, "y": 3.0}), [3.0, 2.0])

    def test_nested_diff(self):
        tag = new_tag()
        d = diff(parse("x^3"), "x", {"x": seed(2.0, tag)})
        self.assertAlmostEqual(real_part(d), 12.0, places=12)
        self.assertAlmostEqual(tangent_part(d, tag), 12.0, places=12)

    def test_diff_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        h = 1e-6
        for _ in range(50):
            e = parse(random_poly(rng, ["x", "y"]))
            env = {"x": rng.uniform(-1, 1), "y": rng.uniform(-1, 1)}
            for name in ("x", "y"):
                exact = diff(e, name, env)
                ahead, behind = dict(env), dict(env)
                ahead[name] += h
                behind[name] -= h
                approx = (evaluate(e, ahead) - evaluate(e, behind)) / (2 * h)
                self.assertLessEqual(abs(exact - approx), 1e-5 * (1 + abs(exact)))

    def test_linearity_and_purity(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p1, p2 = random_poly(rng, ["x", "y"]), random_poly(rng, ["x", "y"])
            a, b = rng.uniform(-2, 2, 2)
            combined = parse("%s*(%s) + %s*(%s)" % (number(a), p1, number(b), p2))
            env = {"x": rng.uniform(-1, 1), "y": rng.uniform(-1, 1)}
            expected = a * diff(parse(p1), "x", env) + b * diff(parse(p2), "x", env)
            self.assertAlmostEqual(diff(combined, "x", env), expected, places=12)
            self.assertEqual(evaluate(combined, env), evaluate(combined, env))

    def test_print_parse(self):
        rng = np.random.default_rng(3)
        sources = ["-x^2", "sin(x)*cos(y) - 2^-1", "atan2(y, x) / (1 + exp(-x))"]
        sources += [random_poly(rng, ["x", "y"]) for _ in range(10)]
        env = {"x": 0.3, "y": -0.7}
        for source in sources:
            e = parse(source)
            self.assertEqual(evaluate(parse(str(e)), env), evaluate(e, env))

    def test_substitute(self):
        e = parse("x^2 + y").substitute({"x": parse("s*cos(t)"), "y": parse("t")})
        self.assertEqual(e.variables, frozenset({"s", "t"}))
        self.assertAlmostEqual(evaluate(e, {"s": 2.0, "t": 0.0}), 4.0, places=15)


class TestGeometry(unittest.TestCase):
    def test_chart(self):
        for names in (["x", "x"], ["x", "t"], ["x_dot"], ["1x"], []):
            with self.assertRaises(ConfigError):
                Chart(names)
        chart = Chart(["t", "x"])
        self.assertEqual(chart.velocity_names, ("t_dot", "x_dot"))
        self.assertEqual(chart.bind([1, 2], [3, 4]), {"t": 1.0, "x": 2.0, "t_dot": 3.0, "x_dot": 4.0})

    def test_constant_metric_is_flat(self):
        chart = Chart(["t", "x", "y"])
        metric = ExprMetric.from_lower(chart, [["2"], ["1", "1"], ["0", "0", "1"]])
        gamma2, gamma1 = christoffel(metric, [0.3, 1.0, 2.0])
        self.assertFalse(np.any(gamma2))
        self.assertFalse(np.any(gamma1))

    def test_polar_christoffel(self):
        chart = Chart(["r", "th"])
        metric = ExprMetric.from_lower(chart, [["1"], ["0", "r^2"]])
        gamma2, _ = christoffel(metric, [2.0, 0.5])
        self.assertAlmostEqual(gamma2[0, 1, 1], -2.0, places=14)
        self.assertAlmostEqual(gamma2[1, 0, 1], 0.5, places=14)
        self.assertAlmostEqual(gamma2[1, 1, 0], 0.5, places=14)
        self.assertEqual(gamma2[0, 0, 0], 0.0)

    def test_christoffel_matches_finite_differences(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            chart = Chart(["x", "y", "z"])
            metric = random_metric(rng, chart)
            q = rng.uniform(-1, 1, 3)
            exact = metric.local(q).gamma2
            approx = finite_christoffel(metric, q)
            self.assertTrue(np.all(np.abs(exact - approx) <= 1e-5 * (1 + np.abs(exact))))

    def test_metric_errors(self):
        chart = Chart(["x", "y"])
        with self.assertRaises(ConfigError):
            ExprMetric(chart, [["1", "x"], ["0", "1"]])
        with self.assertRaises(ConfigError):
            ExprMetric.from_lower(chart, [["1"], ["0", "z"]])
        with self.assertRaises(ConfigError):
            ExprMetric.from_lower(chart, [["1"], ["0"]])
        metric = ExprMetric.from_lower(chart, [["1"], ["0", "x"]])
        with self.assertRaises(DegenerateMetricError):
            metric.metric_at([0.0, 1.0])

    def test_symmetry_by_value(self):
        chart = Chart(["x", "y"])
        metric = ExprMetric(chart, [["1 + y^2", "x*y"], ["y*x", "1 + x^2"]])
        g = metric.metric_at([0.5, -2.0])
        self.assertEqual(g[0][1], g[1][0])
        np.testing.assert_allclose(g, [[5, -1], [-1, 1.25]], atol=1e-15)
        with self.assertRaises(ConfigError):
            ExprMetric(chart, [["1", "x*y"], ["x + y", "1"]])
        # defined nowhere, so never shown equal
        with self.assertRaises(ConfigError):
            ExprMetric(chart, [["1", "log(-1 - x^2)"], ["log(-1 - y^2)", "1"]])

    def test_lower_round_trip(self):
        chart = Chart(["r", "th"])
        metric = ExprMetric.from_lower(chart, [["1"], ["0", "r^2"]])
        again = ExprMetric.from_lower(chart, metric.lower())
        np.testing.assert_array_equal(again.metric_at([1.5, 0.2]), metric.metric_at([1.5, 0.2]))

    def test_gradient_of_radius(self):
        chart, metric = euclidean("x", "y", "z")
        beta = ExactForm(chart, "sqrt(x^2 + y^2 + z^2)")
        grad = grad_form(metric, beta, TangentState([1, 0, 0], [0, 0, 0]))
        np.testing.assert_allclose(grad, [1, 0, 0], atol=1e-15)
        self.assertAlmostEqual(np.linalg.norm(grad), 1.0, places=15)

    def test_second_fundamental_form(self):
        chart, metric = euclidean("x", "y", "z")
        state = TangentState([1, 0, 0], [0, 1, 0])
        beta = ExactForm(chart, "sqrt(x^2 + y^2 + z^2)")
        self.assertAlmostEqual(second_fundamental_form(metric, beta, state), 1.0, places=14)
        v = VectorField(chart, ["x", "y", "z"])
        # nabla_qdot v = qdot for the radial field
        self.assertAlmostEqual(second_fundamental_form(metric, v, state), 1.0, places=14)

    def test_forms(self):
        chart = Chart(["x", "y"])
        form = ExprForm(chart, ["y", "x*x_dot"])
        self.assertTrue(form.depends_on_velocity)
        np.testing.assert_array_equal(form.at(TangentState([2, 3], [5, 7])), [3, 10])
        with self.assertRaises(ConfigError):
            ExprForm(chart, ["z", "0"])
        with self.assertRaises(ConfigError):
            ExactForm(chart, "x_dot")
        np.testing.assert_allclose(ExactForm(chart, "x*y^2").jacobian([1, 2]), [[0, 4], [4, 2]])


class TestDynamics(unittest.TestCase):
    def oscillator(self):
        chart, metric = euclidean("x", "y")
        return MechanicalSystem(chart, metric, potential="(x^2 + y^2)/2")

    def test_euclidean_geodesics(self):
        chart, metric = euclidean("x", "y", "z")
        field = geodesic_field(MechanicalSystem(chart, metric))
        np.testing.assert_array_equal(field.accel(TangentState([1, 2, 3], [4, 5, 6])), [0, 0, 0])

    def test_oscillator(self):
        sys = self.oscillator()
        state = TangentState([1, 2], [3, 4])
        field = free_field(sys)
        np.testing.assert_allclose(field.accel(state), [-1, -2], atol=1e-15)
        np.testing.assert_allclose(covariant_value(field, sys, state), [-1, -2], atol=1e-15)
        np.testing.assert_allclose(force_of(field, sys, state), [-1, -2], atol=1e-15)
        np.testing.assert_allclose(work_form_of(field, sys, state), [1, 2], atol=1e-15)
        self.assertAlmostEqual(kinetic_energy(sys, state), 12.5)
        self.assertAlmostEqual(total_energy(sys, state), 15.0)

    def test_energy_needs_potential(self):
        chart, metric = euclidean("x")
        sys = MechanicalSystem(chart, metric, ExprForm(chart, ["x_dot"]))
        self.assertFalse(sys.conservative)
        with self.assertRaises(ValueError):
            total_energy(sys, TangentState([0], [1]))
        with self.assertRaises(ConfigError):
            MechanicalSystem(chart, metric, ExprForm(chart, ["1"]), potential="x")

    def test_energy_balance(self):
        rng = np.random.default_rng(4)
        chart = Chart(["x", "y"])
        for _ in range(10):
            metric = random_metric(rng, chart)
            alpha = ExprForm(chart, [random_poly(rng, chart.names), random_poly(rng, chart.names)])
            sys = MechanicalSystem(chart, metric, alpha)
            state = random_state(rng, 2)
            self.assertLessEqual(abs(energy_residual(free_field(sys), sys, state)), 1e-10)

    def test_directional_derivative(self):
        sys = self.oscillator()
        state = TangentState([1, 2], [3, 4])
        # d/dt of x qdot_x along the oscillator, qdot_x^2 + x qddot_x
        value = directional_derivative(free_field(sys), lambda q, qdot: q[0] * qdot[0], state)
        self.assertAlmostEqual(value, 9.0 - 1.0, places=14)

    def test_time_class(self):
        chart, metric = euclidean("x", "y", "z")
        tau = ExactForm(chart, "sqrt(x^2 + y^2 + z^2)")
        field = free_field(MechanicalSystem(chart, metric))
        self.assertAlmostEqual(time_class_check(tau, field, TangentState([1, 0, 0], [1, 1, 0])), 1.0)
        with self.assertRaises(ZeroTimeFormError):
            time_class_check(tau, field, TangentState([1, 0, 0], [0, 0, 0]))

    def test_time_class_skips_accelerations(self):
        chart = Chart(["x", "y"])
        calls = []

        def accel(state):
            calls.append(state)
            return np.zeros(2)

        field = SecondOrderField(chart, accel, "counting")
        tau = ExactForm(chart, "x + 2*y")
        self.assertAlmostEqual(time_class_check(tau, field, TangentState([0.3, 0.1], [1, 0])), 1.0)
        self.assertEqual(calls, [])
        base, _ = field.vector(TangentState([0, 0], [3, 4]))
        np.testing.assert_array_equal(base, [3, 4])
        self.assertEqual(len(calls), 1)

    def test_prolongation(self):
        chart = Chart(["x", "y"])
        delta = prolong(VectorField(chart, ["-y", "x"]))
        a, adot = delta.at(TangentState([1, 2], [3, 4]))
        np.testing.assert_array_equal(a, [-2, 1])
        np.testing.assert_array_equal(adot, [-4, 3])

    def test_euler_commutation(self):
        rng = np.random.default_rng(9)
        chart = Chart(["x", "y"])
        h = 1e-6
        for _ in range(50):
            v = VectorField(chart, [random_poly(rng, chart.names), random_poly(rng, chart.names)])
            state = random_state(rng, 2)
            _, adot = prolong(v).at(state)
            approx = (v.at(state.q + h * state.qdot) - v.at(state.q - h * state.qdot)) / (2 * h)
            self.assertLessEqual(np.max(np.abs(adot - approx)), 1e-6)

    def test_zentral_equation(self):
        rng = np.random.default_rng(8)
        chart = Chart(["x", "y"])
        for _ in range(100):
            metric = random_metric(rng, chart)
            alpha = ExprForm(chart, [random_poly(rng, chart.names), random_poly(rng, chart.names)])
            sys = MechanicalSystem(chart, metric, alpha)
            delta = prolong(VectorField(chart, [random_poly(rng, chart.names), random_poly(rng, chart.names)]))
            state = random_state(rng, 2)
            self.assertLessEqual(abs(zentral_residual(free_field(sys), sys, delta, state)), 1e-8)

    def test_hamilton(self):
        rng = np.random.default_rng(10)
        chart = Chart(["x", "y"])
        metric = random_metric(rng, chart)
        sys = MechanicalSystem(chart, metric, potential=random_poly(rng, chart.names))
        for _ in range(10):
            delta = prolong(VectorField(chart, [random_poly(rng, chart.names), random_poly(rng, chart.names)]))
            state = random_state(rng, 2)
            self.assertLessEqual(abs(hamilton_residual(free_field(sys), sys, delta, state)), 1e-8)


class TestConstraints(unittest.TestCase):
    def test_sphere(self):
        sys, constraints = sphere()
        state = TangentState([1, 0, 0], [0, 1, 0])
        np.testing.assert_array_equal(admissible(constraints, state), [0])
        solution = solve_multipliers(sys, constraints, state)
        np.testing.assert_allclose(solution.lambdas, [-1], atol=1e-14)
        self.assertLessEqual(solution.residual, 1e-10)
        np.testing.assert_allclose(gram_matrix(sys, constraints, state), [[1]], atol=1e-15)
        np.testing.assert_allclose(constrained_field(sys, constraints).accel(state), [-1, 0, 0], atol=1e-14)

    def test_sphere_centripetal(self):
        rng = np.random.default_rng(5)
        sys, constraints = sphere()
        field = constrained_field(sys, constraints)
        other = orthonormal_field(sys, constraints)
        for _ in range(20):
            state = tangent_to_sphere(rng)
            q, v = state.q, state.qdot
            expected = -(v @ v) / (q @ q) * q
            np.testing.assert_allclose(field.accel(state), expected, atol=1e-8)
            np.testing.assert_allclose(other.accel(state), expected, atol=1e-8)

    def test_no_constraints(self):
        sys, _ = sphere()
        empty = ConstraintSystem(sys.chart, [])
        state = TangentState([1, 2, 3], [1, 1, 1])
        self.assertEqual(len(solve_multipliers(sys, empty, state).lambdas), 0)
        self.assertEqual(constrained_field(sys, empty).kind, "free")

    def test_invalid_systems(self):
        chart, metric = euclidean("x", "y")
        with self.assertRaises(ConfigError):
            ConstraintSystem(chart, [["1", "0"], ["0", "1"]])
        with self.assertRaises(ConfigError):
            ConstraintSystem(chart, [["x_dot", "0"]])

    def test_dependent(self):
        chart, metric = euclidean("x", "y", "z")
        sys = MechanicalSystem(chart, metric)
        constraints = ConstraintSystem(chart, [["1", "0", "0"], ["2", "0", "0"]])
        with self.assertRaises(DependentConstraintsError):
            solve_multipliers(sys, constraints, TangentState([0, 0, 0], [0, 1, 0]))
        with self.assertRaises(DependentConstraintsError):
            orthonormal_field(sys, constraints).accel(TangentState([0, 0, 0], [0, 1, 0]))

    def test_indefinite(self):
        chart = Chart(["x", "y", "z"])
        metric = ExprMetric.from_lower(chart, [["1"], ["0", "-1"], ["0", "0", "1"]])
        sys = MechanicalSystem(chart, metric)
        constraints = ConstraintSystem(chart, [["1", "0", "0"]])
        with self.assertRaises(IndefiniteMetricError):
            solve_multipliers(sys, constraints, TangentState([0, 0, 0], [0, 1, 0]))

    def test_covariant_decomposition(self):
        sys, constraints = sphere()
        projection, curvature = covariant_decomposition(sys, constraints, TangentState([1, 0, 0], [0, 1, 0]))
        np.testing.assert_allclose(projection, [0, 0, 0], atol=1e-10)
        np.testing.assert_allclose(curvature, [-1, 0, 0], atol=1e-14)

        heavy = MechanicalSystem(sys.chart, sys.metric, potential="z")
        state = TangentState([1, 0, 0], [0, 0, 1])
        projection, curvature = covariant_decomposition(heavy, constraints, state)
        np.testing.assert_allclose(projection, [0, 0, -1], atol=1e-14)
        np.testing.assert_allclose(curvature, [-1, 0, 0], atol=1e-14)
        total = covariant_value(constrained_field(heavy, constraints), heavy, state)
        np.testing.assert_allclose(projection + curvature, total, atol=1e-8)

        with self.assertRaises(InadmissibleStateError):
            covariant_decomposition(sys, constraints, TangentState([1, 0, 0], [1, 0, 0]))

    def test_decomposition_on_samples(self):
        rng = np.random.default_rng(11)
        sys, constraints = sphere()
        for _ in range(20):
            state = tangent_to_sphere(rng)
            projection, curvature = covariant_decomposition(sys, constraints, state)
            self.assertLessEqual(np.max(np.abs(projection)), 1e-10)
            total = covariant_value(constrained_field(sys, constraints), sys, state)
            np.testing.assert_allclose(projection + curvature, total, atol=1e-8)

    def random_system(self, rng, r):
        chart = Chart(["x", "y", "z"])
        metric = random_metric(rng, chart)
        forms = []
        for k in range(r):
            comps = [random_poly(rng, chart.names, 0.1) for _ in range(3)]
            comps[k] = "1 + %s" % comps[k]
            forms.append(comps)
        return MechanicalSystem(chart, metric), ConstraintSystem(chart, forms)

    def test_random_multipliers(self):
        rng = np.random.default_rng(10)
        for k in range(10):
            sys, constraints = self.random_system(rng, 1 + k % 2)
            field = constrained_field(sys, constraints)
            for _ in range(5):
                state, _ = project_velocity(sys, constraints, random_state(rng, 3, -0.5, 0.5))
                self.assertLessEqual(np.max(np.abs(admissible(constraints, state))), 1e-12)
                self.assertLessEqual(solve_multipliers(sys, constraints, state).residual, 1e-10)
                for form in constraints:
                    rate = directional_derivative(
                        field, lambda q, qdot: sum(c * v for c, v in zip(form.components(sys.chart.bind(q, qdot)), qdot)), state
                    )
                    self.assertLessEqual(abs(rate), 1e-8)
                np.testing.assert_allclose(
                    field.accel(state), orthonormal_field(sys, constraints).accel(state), atol=1e-9
                )
                self.assertLessEqual(abs(energy_residual(field, sys, state)), 1e-8)

    def test_random_drift(self):
        rng = np.random.default_rng(12)
        for k in range(2):
            sys, constraints = self.random_system(rng, 1 + k)
            state, _ = project_velocity(sys, constraints, random_state(rng, 3, -0.3, 0.3, 0.5))
            trajectory = integrate(constrained_field(sys, constraints), state, 1e-3, 1.0)
            self.assertTrue(trajectory.completed)
            drift = max(np.max(np.abs(admissible(constraints, trajectory.state(i)))) for i in range(len(trajectory)))
            self.assertLessEqual(drift, 1e-6)

    def test_project_velocity(self):
        sys, constraints = sphere()
        state, moved = project_velocity(sys, constraints, TangentState([2, 0, 0], [1, 1, 0]))
        np.testing.assert_allclose(state.qdot, [0, 1, 0], atol=1e-15)
        self.assertAlmostEqual(moved, 1.0)
        state, _ = project_velocity(sys, constraints, TangentState([2, 0, 0], [0, 1, 0]), [1.0])
        np.testing.assert_allclose(state.qdot, [1, 1, 0], atol=1e-15)

    def test_leaf(self):
        sys, constraints = sphere()
        leaf_chart = Chart(["theta", "phi"])
        embedding = ChartMap(leaf_chart, sys.chart, ["sin(theta)*cos(phi)", "sin(theta)*sin(phi)", "cos(theta)"])
        inverse = ChartMap(sys.chart, leaf_chart, ["atan2(sqrt(x^2 + y^2), z)", "atan2(y, x)"])
        leaf = Leaf(embedding, inverse)
        induced = induced_system(sys, leaf)
        np.testing.assert_allclose(induced.metric.metric_at([1.0, 0.3]), np.diag([1, math.sin(1.0) ** 2]), atol=1e-15)
        gamma2, _ = christoffel(induced.metric, [1.0, 0.3])
        self.assertAlmostEqual(gamma2[0, 1, 1], -math.sin(1.0) * math.cos(1.0), places=14)
        lowered = leaf.lower(TangentState([1, 0, 0], [0, 1, 0]))
        np.testing.assert_allclose(lowered.q, [math.pi / 2, 0], atol=1e-15)
        np.testing.assert_allclose(lowered.qdot, [0, 1], atol=1e-15)
        lifted = leaf.lift(lowered)
        np.testing.assert_allclose(lifted.q, [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(lifted.qdot, [0, 1, 0], atol=1e-15)
        np.testing.assert_allclose(constraints.levels([3, 4, 0]), [5.0])

    def test_induced_potential(self):
        chart, metric = euclidean("x", "y", "z")
        sys = MechanicalSystem(chart, metric, potential="z")
        leaf = Leaf(ChartMap(Chart(["s"]), chart, ["0", "0", "2*s"]))
        induced = induced_system(sys, leaf)
        self.assertTrue(induced.conservative)
        np.testing.assert_allclose(free_field(induced).accel(TangentState([1], [0])), [-0.5], atol=1e-15)


class TestTimeConstraint(unittest.TestCase):
    def radius(self):
        chart, metric = euclidean("x", "y", "z")
        return MechanicalSystem(chart, metric), TimeForm.exact(chart, "sqrt(x^2 + y^2 + z^2)")

    def test_r_equals_t(self):
        sys, tau = self.radius()
        field = modified_field(sys, tau)
        self.assertAlmostEqual(tau.dot(TangentState([1, 0, 0], [1, 1, 0])), 1.0)
        np.testing.assert_allclose(field.accel(TangentState([1, 0, 0], [1, 0, 0])), [0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(field.accel(TangentState([1, 0, 0], [1, 1, 0])), [-1, 0, 0], atol=1e-14)

    def test_r_equals_t_samples(self):
        rng = np.random.default_rng(6)
        sys, tau = self.radius()
        field = modified_field(sys, tau)
        for _ in range(20):
            raw = random_state(rng, 3, 0.5, 1.5)
            state, _ = project_velocity(sys, [tau.form], raw, [1.0])
            q, v = state.q, state.qdot
            self.assertAlmostEqual(tau.dot(state), 1.0, places=12)
            np.testing.assert_allclose(field.accel(state), (1 - v @ v) / (q @ q) * q, atol=1e-8)
            self.assertLessEqual(np.max(np.abs(congruence_residual(field, sys, tau, state))), 1e-9)
            rate = directional_derivative(field, lambda q, qdot: sum(
                c * w for c, w in zip(tau.form.components(sys.chart.bind(q, qdot)), qdot)), state)
            self.assertLessEqual(abs(rate), 1e-9)

    def test_r_equals_t_integration(self):
        sys, tau = self.radius()
        start = TangentState([1, 0, 0], [1, 0.5, 0])
        monitor = expression_monitor(sys.chart, "r", "sqrt(x^2 + y^2 + z^2)")
        trajectory = integrate(modified_field(sys, tau), start, 1e-3, 1.0, [monitor])
        self.assertTrue(trajectory.completed)
        np.testing.assert_allclose(trajectory.monitors["r"], 1.0 + trajectory.times, atol=1e-6)
        rates = [tau.dot(trajectory.state(i)) for i in range(len(trajectory))]
        self.assertLessEqual(np.max(np.abs(np.array(rates) - 1.0)), 1e-8)

    def test_time_form_errors(self):
        chart = Chart(["x", "y"])
        with self.assertRaises(ConfigError):
            TimeForm(chart, ["y", "-x"]).verify_closed([[0.1, 0.2], [0.5, -0.3]])
        self.assertEqual(TimeForm(chart, ["y", "x"]).verify_closed([[0.1, 0.2], [0.5, -0.3]]), 0.0)
        with self.assertRaises(ConfigError):
            TimeForm(chart, ["x_dot", "0"])
        with self.assertRaises(ConfigError):
            TimeForm.coordinate(chart, "t")
        with self.assertRaises(ZeroTimeFormError):
            TimeForm(chart, ["x", "0"]).at_point([0.0, 1.0])
        self.assertEqual(TimeForm.coordinate(chart, "y").coordinate_index(), 1)
        self.assertIsNone(TimeForm(chart, ["y", "x"]).coordinate_index())

    def test_unchecked_time_form(self):
        chart = Chart(["x", "y"])
        sys = MechanicalSystem(chart, ExprMetric.euclidean(chart))
        with self.assertRaises(ConfigError):
            modified_field(sys, TimeForm(chart, ["y", "x"]))
        tau = TimeForm(chart, ["y", "x"])
        tau.verify_closed(SampleBox([0.5, 0.5], [1, 1], samples=8).points())
        self.assertTrue(tau.closed_verified)
        modified_field(sys, tau)
        space, metric = euclidean("t", "x", "y")
        tc = TimeDependentConstraints(TimeForm(space, ["1", "0", "0"]), ConstraintSystem(space, [["0", "1", "0"]]))
        with self.assertRaises(ConfigError):
            time_dependent_field(MechanicalSystem(space, metric), tc)

    def test_isotropic(self):
        chart = Chart(["x", "y"])
        metric = ExprMetric.from_lower(chart, [["1"], ["0", "-1"]])
        sys = MechanicalSystem(chart, metric)
        with self.assertRaises(IsotropicTimeFormError):
            modified_field(sys, TimeForm.exact(chart, "x + y")).accel(TangentState([0, 0], [1, 0]))

    def rotating(self):
        chart, metric = euclidean("t", "x", "y")
        return MechanicalSystem(chart, pullback_metric(rotation(chart), metric))

    def test_adapted_equations(self):
        rng = np.random.default_rng(7)
        sys = self.rotating()
        tau = TimeForm.coordinate(sys.chart, "t")
        for _ in range(20):
            state = random_state(rng, 3)
            self.assertLessEqual(np.max(np.abs(adapted_equations_check(sys, tau, state))), 1e-8)
            still = TangentState(state.q, [0.0, state.qdot[1], state.qdot[2]])
            self.assertLessEqual(holonomic_limit_difference(sys, tau, still), 1e-9)
        with self.assertRaises(ConfigError):
            adapted_equations_check(sys, TimeForm.coordinate(sys.chart, "x"), state)

    def test_displacements(self):
        chart = Chart(["t", "x", "y"])
        tau = TimeForm.coordinate(chart, "t")
        points = SampleBox([0, -1, -1], [1, 1, 1], samples=16).points()
        self.assertEqual(admissible_displacement(tau, VectorField(chart, ["0", "1", "0"]), points).kind, "admissible")
        self.assertEqual(admissible_displacement(tau, VectorField(chart, ["1", "0", "0"]), points).kind, "tangent")
        verdict = admissible_displacement(tau, VectorField(chart, ["x", "0", "0"]), points)
        self.assertEqual(verdict.kind, "not tangent")
        self.assertFalse(verdict.tangent)

    def test_dependent_time_form(self):
        chart, metric = euclidean("x", "y", "z")
        tc = TimeDependentConstraints(TimeForm.coordinate(chart, "x"), ConstraintSystem(chart, [["2", "0", "0"]]))
        with self.assertRaises(DependentConstraintsError):
            tc.check_independent(metric, TangentState([0, 0, 0], [1, 0, 0]))

    def test_assumed_definite(self):
        cfg = load_config("moving_wire")
        with self.assertWarns(UserWarning):
            field = time_dependent_field(cfg.system, cfg.time_dependent(), assume_definite=True)
        self.assertIn("asserted", field.kind)

    def moving_slot(self, form):
        chart, metric = euclidean("t", "x", "y")
        tc = TimeDependentConstraints(TimeForm.coordinate(chart, "t"), ConstraintSystem(chart, [form]))
        return MechanicalSystem(chart, metric), tc

    def test_moving_constraint(self):
        sys, tc = self.moving_slot(["0", "1", "-t"])
        field = time_dependent_field(sys, tc)
        start = TangentState([0, 0, 0], [1, 0, 1])
        # lambda = t_dot y_dot / (1 + t^2) along (0, 1, -t)
        np.testing.assert_allclose(field.accel(start), [0, 1, 0], atol=1e-15)
        np.testing.assert_allclose(field.accel(TangentState([0.5, 0.2, -0.1], [1, 0.5, 1])), [0, 0.8, -0.4], atol=1e-14)

        monitors = constraint_monitors(tc.constraints) + [time_monitor(tc.time_form)]
        trajectory = integrate(field, start, 1e-3, 1.0, monitors)
        self.assertTrue(trajectory.completed)
        t = trajectory.times
        beta_dot = trajectory.monitors["beta1_dot"]
        self.assertLessEqual(np.max(np.abs(beta_dot)), 1e-9)
        self.assertLessEqual(np.max(np.abs(np.gradient(beta_dot, t))), 1e-6)
        np.testing.assert_allclose(trajectory.monitors["tau_dot"], 1.0, atol=1e-12)
        np.testing.assert_allclose(trajectory.q[:, 1], np.sqrt(1 + t ** 2) - 1, atol=1e-9)
        np.testing.assert_allclose(trajectory.q[:, 2], np.arcsinh(t), atol=1e-9)
        for k in range(0, len(trajectory), 100):
            rate = directional_derivative(field, lambda q, qdot: qdot[1] - q[0] * qdot[2], trajectory.state(k))
            self.assertLessEqual(abs(rate), 1e-12)

    def test_frozen_coordinate(self):
        rng = np.random.default_rng(12)
        sys, tc = self.moving_slot(["0", "1", "0"])
        field = time_dependent_field(sys, tc)
        for _ in range(10):
            np.testing.assert_allclose(field.accel(random_state(rng, 3)), [0, 0, 0], atol=1e-15)
        trajectory = integrate(field, TangentState([0, 0.3, 0], [1, 0, 2]), 0.01, 1.0)
        self.assertTrue(trajectory.completed)
        np.testing.assert_allclose(trajectory.q[:, 1], 0.3, atol=1e-15)
        np.testing.assert_allclose(trajectory.q[:, 2], 2 * trajectory.times, atol=1e-12)

    def test_moving_wire(self):
        cfg = load_config("moving_wire")
        field = time_dependent_field(cfg.system, cfg.time_dependent())
        start = cfg.integration["state"]
        on_m = integrate(field, start, 1e-3, 1.0)
        self.assertTrue(on_m.completed)
        levels = np.array([cfg.constraints.levels(q) for q in on_m.q])
        self.assertLessEqual(np.max(np.abs(levels)), 1e-6)
        np.testing.assert_allclose(on_m.qdot[:, 0], 1.0, atol=1e-10)

        induced = induced_system(cfg.system, cfg.leaf)
        leaf_start = cfg.leaf.lower(start)
        np.testing.assert_allclose(leaf_start.q, [0, 1], atol=1e-15)
        np.testing.assert_allclose(leaf_start.qdot, [1, 0], atol=1e-15)
        on_n = integrate(modified_field(induced, cfg.leaf_time_form), leaf_start, 1e-3, 1.0)
        self.assertTrue(on_n.completed)
        for i in range(0, len(on_n), 50):
            lifted = cfg.leaf.lift(on_n.state(i))
            np.testing.assert_allclose(lifted.q, on_m.q[i], atol=1e-6)
            np.testing.assert_allclose(lifted.qdot, on_m.qdot[i], atol=1e-6)
        np.testing.assert_allclose(on_n.q[:, 1], np.cosh(on_n.times), atol=1e-6)
        state = on_m.state(len(on_m) // 2)
        self.assertLessEqual(np.max(np.abs(congruence_residual(field, cfg.system, cfg.time_dependent(), state))), 1e-9)


class TestFrames(unittest.TestCase):
    def setUp(self):
        self.chart, self.metric = euclidean("t", "x", "y")
        self.flat = geodesic_field(MechanicalSystem(self.chart, self.metric))

    def test_translation_pullback(self):
        frame = translation(self.chart, [1, 0])
        expected = [[2, 1, 0], [1, 1, 0], [0, 0, 1]]
        np.testing.assert_allclose(pullback_metric(frame, self.metric).metric_at([0.4, 1, 2]), expected, atol=1e-15)

    def test_rotation_pullback(self):
        frame = rotation(self.chart)
        expected = [[6, -2, 1], [-2, 1, 0], [1, 0, 1]]
        for t in (0.0, 0.7):
            np.testing.assert_allclose(pullback_metric(frame, self.metric).metric_at([t, 1, 2]), expected, atol=1e-12)
        np.testing.assert_allclose(frame.generator([1, 2]), [-2, 1], atol=1e-15)

    def test_dilatation_pullback(self):
        frame = dilatation(self.chart)
        x, y = 0.3, -0.8
        expected = [[1 + x * x + y * y, x, y], [x, 1, 0], [y, 0, 1]]
        np.testing.assert_allclose(pullback_metric(frame, self.metric).metric_at([0, x, y]), expected, atol=1e-15)

    def test_closed_form_pullback(self):
        rng = np.random.default_rng(4)
        space = ExprMetric.euclidean(Chart(["x", "y"]))
        for frame in (translation(self.chart, [0.5, -1]), rotation(self.chart, 2.0), dilatation(self.chart, 0.5)):
            pullback = pullback_metric(frame, self.metric)
            for _ in range(20):
                q = rng.uniform(-1, 1, 3)
                np.testing.assert_allclose(
                    pullback.metric_at(q), closed_form_pullback(frame, space, q), atol=1e-9
                )

    def test_rotation_force(self):
        rng = np.random.default_rng(1)
        frame = rotation(self.chart)
        for _ in range(20):
            t, x, y = rng.uniform(-1, 1, 3)
            xd, yd = rng.uniform(-1, 1, 2)
            force = inertial_force(frame, self.metric, self.metric, TangentState([t, x, y], [1, xd, yd]))
            np.testing.assert_allclose(force, [0, x + 2 * yd, y - 2 * xd], atol=1e-7)
        force = inertial_force(frame, self.metric, self.metric, TangentState([0, 1, 0], [1, 0, 0]))
        np.testing.assert_allclose(force, [0, 1, 0], atol=1e-12)

    def test_dilatation_field(self):
        rng = np.random.default_rng(2)
        field = transported_field(dilatation(self.chart), self.flat)
        for _ in range(20):
            x, y, xd, yd = rng.uniform(-1, 1, 4)
            accel = field.accel(TangentState([0, x, y], [1, xd, yd]))
            np.testing.assert_allclose(accel, [0, -x - 2 * xd, -y - 2 * yd], atol=1e-7)
        force = inertial_force(dilatation(self.chart), self.metric, self.metric, TangentState([0, 1, 0], [1, 0, 0]))
        self.assertAlmostEqual(force[1], -1.0, places=12)

    def test_translation_force(self):
        rng = np.random.default_rng(3)
        frame = translation(self.chart, [1, 0])
        for _ in range(20):
            state = TangentState(rng.uniform(-1, 1, 3), [1.0] + list(rng.uniform(-1, 1, 2)))
            self.assertLessEqual(np.max(np.abs(inertial_force(frame, self.metric, self.metric, state))), 1e-9)

    def test_identity_and_composition(self):
        rng = np.random.default_rng(5)
        sys = MechanicalSystem(self.chart, self.metric, potential="(x^2 + y^2)/2")
        field = free_field(sys)
        names = list(self.chart.names)
        identity = Frame(self.chart, self.chart, names, names)
        phi, psi = rotation(self.chart, 0.5), translation(self.chart, [1, 2])
        direct = transported_field(phi.compose(psi), field)
        stepwise = transported_field(psi, transported_field(phi, field))
        for _ in range(10):
            state = random_state(rng, 3)
            np.testing.assert_allclose(transported_field(identity, field).accel(state), field.accel(state), atol=1e-14)
            np.testing.assert_allclose(direct.accel(state), stepwise.accel(state), atol=1e-8)

    def test_isometries_carry_newton(self):
        rng = np.random.default_rng(6)
        chart, metric = euclidean("x", "y")
        alpha = ExprForm(chart, ["x + y^2", "1 - x*y"])
        bar = free_field(MechanicalSystem(chart, metric, alpha))
        turn = Frame(chart, chart, ["x*cos(0.7) - y*sin(0.7)", "x*sin(0.7) + y*cos(0.7)"],
                     ["x*cos(0.7) + y*sin(0.7)", "y*cos(0.7) - x*sin(0.7)"])
        stretch = Frame(chart, chart, ["2*x", "2*y"], ["x/2", "y/2"])
        worst = 0.0
        for _ in range(10):
            state = random_state(rng, 2)
            own = free_field(MechanicalSystem(chart, metric, pullback_form(turn, alpha)))
            np.testing.assert_allclose(transported_field(turn, bar).accel(state), own.accel(state), atol=1e-8)
            own = free_field(MechanicalSystem(chart, metric, pullback_form(stretch, alpha)))
            moved = transported_field(stretch, bar).accel(state)
            worst = max(worst, np.max(np.abs(moved - own.accel(state))))
        self.assertGreaterEqual(worst, 1e-3)

    def test_hessian(self):
        frame = rotation(self.chart)
        q = np.array([0.3, 1.0, -0.5])
        h = 1e-5
        approx = np.zeros((3, 3, 3))
        for j in range(3):
            step = np.zeros(3)
            step[j] = h
            approx[:, j, :] = (frame.jacobian(q + step) - frame.jacobian(q - step)) / (2 * h)
        np.testing.assert_allclose(frame.hessian(q), approx, atol=1e-5)

    def test_frame_errors(self):
        chart = Chart(["x", "y"])
        wrong = Frame(chart, chart, ["2*x", "y"], ["x", "y"])
        with self.assertRaises(ConfigError):
            wrong.check_inverse([[1.0, 1.0]])
        cube = Frame(chart, chart, ["x^3", "y"], ["x", "y"])
        flat = geodesic_field(MechanicalSystem(chart, ExprMetric.euclidean(chart)))
        with self.assertRaises(SingularJacobianError):
            transported_field(cube, flat).accel(TangentState([0, 0], [1, 1]))
        with self.assertRaises(ConfigError):
            translation(Chart(["x", "y"]), [1])
        with self.assertRaises(ConfigError):
            SampleBox([0, 0], [1, -1])
        frame = rotation(self.chart)
        self.assertLessEqual(frame.inverse_defect(SampleBox([0, -1, -1], [1, 1, 1], samples=8).points()), 1e-12)
        self.assertLessEqual(frame.identity_defect([[1, 2], [-0.5, 0.3]]), 1e-15)

    def test_classification(self):
        space = ExprMetric.euclidean(Chart(["x", "y"]))
        box = SampleBox([0, -1, -1], [1, 1, 1], samples=16)
        expected = {
            "translation": (translation(self.chart, [1, 0]), {"inertial": True, "isometry_group": True, "preserves_equations": True}),
            "rotation": (rotation(self.chart), {"inertial": False, "isometry_group": True, "preserves_equations": False}),
            "dilatation": (dilatation(self.chart), {"inertial": False, "isometry_group": False, "preserves_equations": False}),
        }
        for name, (frame, verdict) in expected.items():
            result = classify_frame(frame, space, box)
            self.assertEqual(result.verdict(), verdict, name)
            self.assertTrue(result.theorem_agrees)
            self.assertEqual(result.samples, 16)


class TestIntegrate(unittest.TestCase):
    def test_free_particle(self):
        chart, metric = euclidean("x")
        sys = MechanicalSystem(chart, metric)
        trajectory = integrate(free_field(sys), TangentState([0], [1]), 0.5, 1.0, [kinetic_monitor(sys)])
        np.testing.assert_array_equal(trajectory.times, [0, 0.5, 1])
        np.testing.assert_array_equal(trajectory.q[:, 0], [0, 0.5, 1])
        np.testing.assert_array_equal(trajectory.monitors["T"], [0.5, 0.5, 0.5])
        self.assertEqual(trajectory.drift(), {"T": 0.0})

    def test_step_must_divide(self):
        chart, metric = euclidean("x")
        field = free_field(MechanicalSystem(chart, metric))
        with self.assertRaises(ValueError):
            integrate(field, TangentState([0], [1]), 0.3, 1.0)
        with self.assertRaises(ValueError):
            integrate(field, TangentState([0], [1]), -0.5, 1.0)

    def test_partial_trajectory(self):
        chart = Chart(["x"])
        blowup = SecondOrderField(chart, lambda s: np.array([np.inf if s.q[0] > 0.5 else 0.0]), "test")
        trajectory = integrate(blowup, TangentState([0], [1]), 0.1, 1.0)
        self.assertFalse(trajectory.completed)
        self.assertLess(trajectory.times[-1], 1.0)
        self.assertTrue(np.all(np.isfinite(trajectory.q)))

    def test_warnings(self):
        chart, metric = euclidean("x")
        sys = MechanicalSystem(chart, metric)
        with self.assertWarns(UserWarning):
            integrate(free_field(sys), TangentState([0], [1]), 0.5, 1.0,
                      [expression_monitor(chart, "x", "x")], drift_tolerance={"x": 0.1})
        with self.assertWarns(UserWarning):
            integrate(free_field(sys), TangentState([0], [1]), 0.5, 1.0, project=lambda s: (s, 0.0))

    def test_order(self):
        chart, metric = euclidean("x", "y")
        field = free_field(MechanicalSystem(chart, metric, potential="(x^2 + y^2)/2"))
        start = TangentState([1, 0], [0, 1])
        errors = []
        for h in (0.2, 0.1):
            final = integrate(field, start, h, 2.0).final
            errors.append(np.max(np.abs(final.q - [math.cos(2.0), math.sin(2.0)])))
        self.assertTrue(12 <= errors[0] / errors[1] <= 20)
        self.assertLess(estimate_error(field, start, 0.1), estimate_error(field, start, 0.2))

    def test_oscillator_energy(self):
        cfg = load_config("oscillator")
        settings = cfg.integration
        trajectory = integrate(cfg.field(), settings["state"], settings["h"], settings["t_end"], [energy_monitor(cfg.system)])
        self.assertTrue(trajectory.completed)
        self.assertLessEqual(trajectory.drift()["H"], 1e-6)
        np.testing.assert_allclose(trajectory.final.q, [1, 0], atol=1e-6)

    def test_great_circle(self):
        sys, constraints = sphere()
        steps = 6283
        h = 2 * math.pi / steps
        start = TangentState([1, 0, 0], [0, 1, 0])
        trajectory = integrate(constrained_field(sys, constraints), start, h, steps * h)
        self.assertTrue(trajectory.completed)
        np.testing.assert_allclose(trajectory.final.q, start.q, atol=1e-5)
        np.testing.assert_allclose(trajectory.final.qdot, start.qdot, atol=1e-5)
        self.assertLessEqual(np.max(np.abs(np.linalg.norm(trajectory.q, axis=1) - 1)), 1e-6)
        self.assertLessEqual(np.max(np.abs(np.linalg.norm(trajectory.qdot, axis=1) - 1)), 1e-7)
        half = trajectory.state(steps // 2)
        np.testing.assert_allclose(half.q, [-1, 0, 0], atol=1e-3)


class TestConfig(unittest.TestCase):
    def test_gallery(self):
        names = gallery_names()
        for name in ["sphere_r_const", "sphere_r_equals_t", "frame_translation", "frame_rotation",
                     "frame_dilatation", "oscillator", "moving_wire", "moving_slot"]:
            self.assertIn(name, names)
        kinds = {
            "sphere_r_const": "constrained",
            "sphere_r_equals_t": "time_constrained",
            "frame_rotation": "transported",
            "moving_wire": "time_dependent",
            "moving_slot": "time_dependent",
            "oscillator": "free",
        }
        for name in names:
            cfg = load_config(name)
            if name in kinds:
                self.assertEqual(cfg.field_kind, kinds[name])
            cfg.field()

    def test_read_sections(self):
        text = (
            "# a comment\n"
            'chart = "x", "y"  # names\n'
            'description = "see #1"\n'
            "h = 1e-3\n"
            "\n"
            "[sampling]\n"
            "low = -1, 0.5\n"
            "samples = 4\n"
            "project = true\n"
        )
        self.assertEqual(
            read_sections(text),
            {
                "chart": ["x", "y"],
                "description": "see #1",
                "h": 0.001,
                "sampling": {"low": [-1, 0.5], "samples": 4, "project": True},
            },
        )

    def test_syntax_errors(self):
        cases = [
            'chart = "x"\nmetric = "euclidean"\noops\n',
            'chart = "x"\nmetric = "euclidean"\npotential = x^2\n',
            'chart = "x"\nmetric = "euclidean"\nchart = "y"\n',
            'chart = "x"\n[integration]\n[integration]\n',
        ]
        for text, line in zip(cases, [3, 3, 3, 3]):
            with self.assertRaises(ConfigError) as caught:
                read_sections(text)
            self.assertEqual(caught.exception.line, line)
        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, "broken.cfg")
            with open(path, "w") as f:
                f.write(cases[0])
            with self.assertRaises(ConfigError) as caught:
                load_config(path)
            self.assertEqual(caught.exception.line, 3)

    def test_unknown_keys(self):
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["x"], "metric": "euclidean", "metirc": "euclidean"})
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["x"], "metric": "euclidean", "integration": {"step": 1}})
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["x"], "metric": "euclidean", "field": "geodesik"})
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["t", "x"], "metric": "euclidean", "frame": {"group": "spin"}})
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["x"], "metric": "euclidean", "potential": "x", "force": ["1"]})
        with self.assertRaises(ConfigError):
            load_config("no_such_system")
        with self.assertRaises(ConfigError) as caught:
            parse_config('chart = "x", "y"\nmetric = "euclidean"\n\n[constraints]\nfrom1 = "1", "0"\n')
        self.assertEqual(caught.exception.line, 5)

    def test_one_level(self):
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["x"], "metric": [["1"]]})
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["x", "y"], "metric": "euclidean", "constraints": {"form1": [["1", "0"]]}})
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["x"], "metric": "euclidean", "integration": "fast"})
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["x"], "metric": {"row2": "1"}})
        with self.assertRaises(ConfigError):
            SystemConfig({"chart": ["x"], "metric": "euclidean", "monitors": {"x2": "x^2"}})

    def test_time_form_components(self):
        text = 'chart = "x", "y"\nmetric = "euclidean"\n\n[time_form]\ncomponents = "y", "-x"\n'
        with self.assertRaises(ConfigError) as caught:
            parse_config(text)
        self.assertEqual(caught.exception.line, 4)
        cfg = parse_config(text.replace('"-x"', '"x"'))
        self.assertTrue(cfg.time_form.closed_verified)
        self.assertEqual(cfg.field_kind, "time_constrained")
        cfg.field()

    def test_force(self):
        cfg = SystemConfig({"chart": ["x"], "metric": "euclidean", "force": "-x"})
        np.testing.assert_allclose(cfg.field().accel(TangentState([2], [0])), [-2])

    def test_dump(self):
        cfg = SystemConfig(
            {"chart": ["r", "th"], "metric": {"row1": "1", "row2": ["0", "r^2"]}, "potential": "r"}
        )
        text = cfg.dump()
        self.assertIn("[metric]", text)
        again = parse_config(text)
        state = TangentState([1.5, 0.2], [0.3, -1])
        np.testing.assert_array_equal(again.metric.metric_at(state.q), cfg.metric.metric_at(state.q))
        np.testing.assert_array_equal(again.field().accel(state), cfg.field().accel(state))
        wire = load_config("moving_wire")
        self.assertEqual(read_sections(wire.dump()), wire.document)

    def test_parse_state(self):
        state = parse_state("1, 0,0; 0 ,1, 0", 3)
        np.testing.assert_array_equal(state.q, [1, 0, 0])
        np.testing.assert_array_equal(state.qdot, [0, 1, 0])
        for text in ["1, 0; 0, 1", "1,0,0", "1,a,0; 0,1,0"]:
            with self.assertRaises(ConfigError):
                parse_state(text, 3)


class TestCli(unittest.TestCase):
    def run_main(self, *args):
        out = io.StringIO()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            code = main(list(args), out=out)
        return code, out.getvalue()

    def test_derive(self):
        code, text = self.run_main("derive", "--config", "sphere_r_const")
        self.assertEqual(code, 0)
        self.assertIn("lambda = (-1)", text)
        self.assertIn("Christoffel symbols: all zero", text)
        code, text = self.run_main("derive", "--config", "frame_rotation", "--state", "0,1,0; 1,0,0")
        self.assertEqual(code, 0)
        self.assertIn("inertial force = ", text)
        self.assertIn("transported accel = ", text)

    def test_simulate(self):
        code, text = self.run_main("simulate", "--config", "free_particle")
        self.assertEqual(code, 0)
        self.assertEqual(text.splitlines(), ["t,x,x_dot,T", "0,0,1,0.5", "0.5,0.5,1,0.5", "1,1,1,0.5"])

    def test_simulate_r_equals_t(self):
        out = io.StringIO()
        trajectory = cmd_simulate(load_config("sphere_r_equals_t"), out)
        self.assertAlmostEqual(trajectory.monitors["r"][-1], 2.0, delta=1e-6)
        header = out.getvalue().splitlines()[0]
        self.assertEqual(header, "t,x,y,z,x_dot,y_dot,z_dot,T,tau_dot,r")

    def test_verify(self):
        code, text = self.run_main("verify", "--config", "free_particle")
        self.assertEqual(code, 0, text)
        self.assertNotIn("FAIL", text)
        checks = run_checks(load_config("sphere_r_const"))
        failed = [c.line() for c in checks if not c.passed]
        self.assertEqual(failed, [])
        self.assertIn("leaf specialization", [c.name for c in checks])
        checks = run_checks(load_config("moving_slot"))
        self.assertEqual([c.line() for c in checks if not c.passed], [])
        self.assertIn("time level tangency", [c.name for c in checks])

    def test_verify_failure(self):
        text = (
            'chart = "x", "y", "z"\n'
            'metric = "euclidean"\n'
            "\n"
            "[constraints]\n"
            'form1 = "1", "0", "0"\n'
            'form2 = "2", "0", "0"\n'
            "\n"
            "[sampling]\n"
            "samples = 4\n"
        )
        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, "dependent.cfg")
            with open(path, "w") as f:
                f.write(text)
            code, text = self.run_main("verify", "--config", path)
        self.assertEqual(code, 3)
        self.assertIn("DependentConstraintsError", text)

    def test_frame(self):
        code, text = self.run_main("frame", "--config", "frame_translation")
        self.assertEqual(code, 0)
        self.assertIn("inertial: true", text)
        self.assertIn("isometry_group: true", text)
        self.assertIn("preserves_equations: true", text)

    def test_exit_codes(self):
        self.assertEqual(self.run_main("verify", "--config", "no_such_system")[0], 1)
        self.assertEqual(self.run_main("derive", "--config", "oscillator", "--state", "1,2")[0], 1)
        self.assertEqual(self.run_main("frame", "--config", "oscillator")[0], 1)


if __name__ == "__main__":
    unittest.main()
