"""System definitions in a flat, sectioned key = value text format, and the
bundled gallery of worked examples

A definition looks like::

    # point on the unit sphere
    chart = "x", "y", "z"
    metric = "euclidean"
    potential = "z"

    [constraints]
    functions = "sqrt(x^2 + y^2 + z^2)"

    [integration]
    h = 0.001
    t_end = 1
    state = "1, 0, 0; 0, 1, 0"

Keys before the first ``[section]`` header belong to the top level. A value is
one item or a comma separated list of items, an item being a quoted string
(every expression is quoted), a number or true/false. Nothing nests deeper
than one section: a metric that is not ``"euclidean"`` is a ``[metric]``
section of lower triangular rows ``row1``, ``row2``.., linear constraints are
``form1``, ``form2``.. of a ``[constraints]`` section, and the named monitors
and drift tolerances of a run have their own ``[monitors]`` and
``[drift_tolerance]`` sections.

The work form is given as "work_form" (alpha), "potential" (U, alpha = dU) or
"force" (the classical force covector, alpha = -force).
"""
import os

import numpy as np
import regex

from .constraints import ConstraintSystem, Leaf, constrained_field, orthonormal_field, project_velocity
from .dynamics import MechanicalSystem, free_field, geodesic_field
from .errors import ConfigError
from .expr import Neg, parse
from .frames import BUILTIN_FRAMES, ChartMap, Frame, GroupFrame, SampleBox, transported_field
from .geometry import Chart, ExprForm, ExprMetric, TangentState
from .integrate import (
    constraint_monitors,
    energy_monitor,
    expression_monitor,
    kinetic_monitor,
    level_monitors,
    time_monitor,
)
from .timeconstraint import TimeDependentConstraints, TimeForm, modified_field, time_dependent_field

try:
    from fuzzywuzzy import process as fuzzy_process
except ImportError:
    fuzzy_process = None

__all__ = [
    "SystemConfig",
    "load_config",
    "parse_config",
    "read_sections",
    "write_sections",
    "parse_state",
    "gallery_names",
    "FIELD_KINDS",
]

route = os.path.abspath(os.path.dirname(__file__))
gallery_dir = "%s/gallery" % route
EXTENSION = ".cfg"

ROOT_KEYS = (
    "name",
    "description",
    "chart",
    "metric",
    "work_form",
    "potential",
    "force",
    "field",
    "time_form",
)

# None lets a section hold any key
SECTIONS = {
    "metric": (),
    "constraints": ("functions",),
    "time_form": ("components", "function", "coordinate", "assume_definite"),
    "frame": ("group", "direction", "rate", "plane", "map", "inverse"),
    "leaf": ("chart", "embedding", "inverse", "time_form"),
    "integration": ("h", "t_end", "t0", "state", "project"),
    "monitors": None,
    "drift_tolerance": None,
    "sampling": ("low", "high", "speed", "samples", "seed", "forms", "tolerance"),
}

# sections holding numbered keys row1, row2.. or form1, form2..
NUMBERED = {"metric": "row", "constraints": "form"}

FIELD_KINDS = (
    "free",
    "geodesic",
    "constrained",
    "orthonormal",
    "time_constrained",
    "time_dependent",
    "transported",
)

_STATE = regex.compile(r"^\s*([^;]*);([^;]*)$")
_HEADER = regex.compile(r"^\[\s*(?P<name>[A-Za-z_]\w*)\s*\]$")
_PAIR = regex.compile(r"^(?P<key>[A-Za-z_]\w*)\s*=\s*(?P<value>.*)$")
_ITEM = r'"[^"]*"|true|false|[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?'
_VALUE = regex.compile(r"^(?P<item>%s)(?:\s*,\s*(?P<item>%s))*$" % (_ITEM, _ITEM))
_COMMENT = regex.compile(r'^((?:[^"#]|"[^"]*")*)#.*$')
_INTEGER = regex.compile(r"^[-+]?\d+$")


def _suggest(word, choices):
    if fuzzy_process is None or not choices:
        return ""
    guess = fuzzy_process.extractOne(word, list(choices))
    if guess is not None and guess[1] >= 60:
        return ", did you mean '%s'?" % guess[0]
    return ""


def _constant(e, value):
    return not e.variables and e.eval({}) == value


def _listed(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _item(token):
    if token.startswith('"'):
        return token[1:-1]
    if token in ("true", "false"):
        return token == "true"
    if _INTEGER.match(token):
        return int(token)
    return float(token)


def _format_item(key, value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise ConfigError("The value of '%s' is not finite: %s" % (key, value))
        return repr(float(value))
    text = str(value)
    if '"' in text:
        raise ConfigError("The value of '%s' may not contain a double quote: %s" % (key, text))
    return '"%s"' % text


def _format(key, value):
    items = _listed(value)
    if not items:
        raise ConfigError("The key '%s' has an empty list, which the text format cannot hold" % key)
    return ", ".join(_format_item(key, v) for v in items)


def read_sections(text):
    """Parses sectioned key = value text

    Args:
        text (str): Text of a system definition

    Raises:
        ConfigError: A line that is not a header, a pair or a comment, a repeated key or section,
            or a value that is not a list of items (with the line number)

    Returns:
        dict: The top level keys, then one flat dict per section. A single item is stored as
        itself, several as a list.
    """
    document = {}
    current = document
    for number, raw in enumerate(text.splitlines(), 1):
        stripped = _COMMENT.match(raw)
        line = (stripped.group(1) if stripped else raw).strip()
        if not line:
            continue
        header = _HEADER.match(line)
        if header is not None:
            name = header["name"]
            if name in document:
                raise ConfigError("'%s' is given twice" % name, number)
            current = document[name] = {}
            continue
        pair = _PAIR.match(line)
        if pair is None:
            raise ConfigError("Expected '[section]' or 'key = value', got '%s'" % line, number)
        key = pair["key"]
        if key in current:
            raise ConfigError("The key '%s' is given twice" % key, number)
        value = _VALUE.match(pair["value"])
        if value is None:
            raise ConfigError(
                "The value of '%s' must be quoted strings, numbers or true/false separated by "
                "commas, got '%s'" % (key, pair["value"]),
                number,
            )
        items = [_item(token) for token in value.captures("item")]
        current[key] = items[0] if len(items) == 1 else items
    return document


def write_sections(document):
    """Writes a document as sectioned key = value text, the inverse of read_sections

    Raises:
        ConfigError: A string holds a double quote, a number is not finite or a list is empty

    Returns:
        str: The text
    """
    lines = []
    sections = []
    for key, value in document.items():
        if isinstance(value, dict):
            sections.append((key, value))
        else:
            lines.append("%s = %s" % (key, _format(key, value)))
    for name, section in sections:
        if lines:
            lines.append("")
        lines.append("[%s]" % name)
        lines.extend("%s = %s" % (key, _format(key, value)) for key, value in section.items())
    return "\n".join(lines) + "\n"


def gallery_names():
    """Names of the bundled configurations"""
    return sorted(f[: -len(EXTENSION)] for f in os.listdir(gallery_dir) if f.endswith(EXTENSION))


def parse_state(text, dim):
    """Parses "q1, .., qn; qdot1, .., qdotn"

    Args:
        text (str): State text
        dim (int): Chart dimension

    Raises:
        ConfigError: Not two groups of dim numbers

    Returns:
        TangentState: The state
    """
    match = _STATE.match(text)
    if match is None:
        raise ConfigError(
            "A state is written 'q1, .., qn; qdot1, .., qdotn', got '%s'" % text
        )
    try:
        groups = [
            [float(x) for x in regex.split(r"[,\s]+", part.strip()) if x]
            for part in match.groups()
        ]
    except ValueError:
        raise ConfigError("The state '%s' contains something that is not a number" % text)
    if any(len(g) != dim for g in groups):
        raise ConfigError(
            "The state '%s' needs %s positions and %s velocities" % (text, dim, dim)
        )
    return TangentState(*groups)


class SystemConfig:
    """A validated system definition and the evaluators built from it"""

    def __init__(self, document, text=None, source="<dict>"):
        """Builds everything the document describes

        Args:
            document (dict): Top level keys and flat sections, as read_sections returns them
            text (str, optional): Raw text, used to report line numbers. Defaults to None.
            source (str, optional): Where the document came from. Defaults to "<dict>".

        Raises:
            ConfigError: The document is not a valid system definition
        """
        if not isinstance(document, dict):
            raise ConfigError("A system definition must be a dict of keys and sections")
        self.document = document
        self.text = text
        self.source = source
        self._check_keys()
        self.name = document.get("name", os.path.splitext(os.path.basename(source))[0])
        self.chart = self._wrap("chart", lambda: Chart(_listed(self._required("chart"))))
        self.metric = self._wrap("metric", self._build_metric)
        self.system = self._wrap("work_form", self._build_system)
        self.constraints = self._wrap("constraints", self._build_constraints)
        self.time_form = self._wrap("time_form", self._build_time_form)
        self.assume_definite = bool(self._section("time_form").get("assume_definite", False))
        self.frame = self._wrap("frame", self._build_frame)
        self.space_metric = self._wrap("metric", self._build_space_metric) if self.frame else None
        self.leaf, self.leaf_time_form = self._wrap("leaf", self._build_leaf)
        self.integration = self._wrap("integration", self._build_integration)
        self.sampling = self._wrap("sampling", self._build_sampling)
        self._wrap("time_form", self._certify_time_forms)
        kind = document.get("field")
        if kind is not None and kind not in FIELD_KINDS:
            raise ConfigError(
                "Unknown field '%s', choose from %s%s" % (kind, list(FIELD_KINDS), _suggest(kind, FIELD_KINDS)),
                self._line("field"),
            )
        self.field_kind = kind or self._default_field()

    def _line(self, key):
        if self.text is None:
            return None
        pattern = r"^\s*(?:\[\s*%s\s*\]|%s\s*=)" % (regex.escape(key), regex.escape(key))
        match = regex.search(pattern, self.text, flags=regex.MULTILINE)
        if match is None:
            return None
        return self.text.count("\n", 0, match.start()) + 1

    def _wrap(self, key, build):
        try:
            return build()
        except ConfigError as exc:
            if exc.line is None and self._line(key) is not None:
                raise ConfigError(str(exc), self._line(key)) from exc
            raise

    def _check_flat(self, key, value):
        if isinstance(value, dict) or (
            isinstance(value, (list, tuple)) and any(isinstance(v, (list, tuple, dict)) for v in value)
        ):
            raise ConfigError(
                "'%s' nests a list or a section, a value is one item or a flat list of items" % key,
                self._line(key),
            )

    def _check_section(self, name, section):
        allowed = SECTIONS[name]
        numbered = NUMBERED.get(name)
        for key, value in section.items():
            known = (
                allowed is None
                or key in allowed
                or (numbered is not None and regex.fullmatch(r"%s[1-9]\d*" % numbered, key) is not None)
            )
            if not known:
                choices = tuple(allowed) + ((numbered + "1",) if numbered else ())
                raise ConfigError(
                    "Unknown key '%s' in section [%s]%s" % (key, name, _suggest(key, choices)),
                    self._line(key),
                )
            self._check_flat(key, value)

    def _check_keys(self):
        for key, value in self.document.items():
            if isinstance(value, dict):
                if key not in SECTIONS:
                    raise ConfigError(
                        "Unknown section [%s]%s" % (key, _suggest(key, SECTIONS)), self._line(key)
                    )
                self._check_section(key, value)
            elif key not in ROOT_KEYS:
                if key in SECTIONS:
                    raise ConfigError("'%s' is a section, write it under a [%s] header" % (key, key), self._line(key))
                raise ConfigError(
                    "Unknown key '%s'%s" % (key, _suggest(key, ROOT_KEYS + tuple(SECTIONS))), self._line(key)
                )
            else:
                self._check_flat(key, value)
        given = [k for k in ("work_form", "potential", "force") if k in self.document]
        if len(given) > 1:
            raise ConfigError(
                "Give only one of work_form, potential and force, got %s" % given, self._line(given[1])
            )

    def _required(self, key):
        if key not in self.document:
            raise ConfigError("The key '%s' is required" % key)
        return self.document[key]

    def _section(self, key):
        value = self.document.get(key, {})
        if isinstance(value, dict):
            return value
        return {}

    def _numbered(self, name):
        prefix = NUMBERED[name]
        found = {}
        for key, value in self._section(name).items():
            match = regex.fullmatch(r"%s([1-9]\d*)" % prefix, key)
            if match is not None:
                found[int(match.group(1))] = _listed(value)
        if sorted(found) != list(range(1, len(found) + 1)):
            raise ConfigError(
                "The [%s] section numbers its keys %s1, %s2.. without gaps, got %s"
                % (name, prefix, prefix, ["%s%s" % (prefix, k) for k in sorted(found)])
            )
        return [found[k] for k in sorted(found)]

    def _build_metric(self):
        metric = self._required("metric")
        if metric == "euclidean":
            return ExprMetric.euclidean(self.chart)
        if not isinstance(metric, dict):
            raise ConfigError(
                'The metric is "euclidean" or a [metric] section of lower triangular rows row1 .. row%s'
                % self.chart.dim
            )
        return ExprMetric.from_lower(self.chart, self._numbered("metric"))

    def _build_system(self):
        doc = self.document
        if "potential" in doc:
            return MechanicalSystem(self.chart, self.metric, potential=doc["potential"])
        if "force" in doc:
            force = [parse(c) for c in _listed(doc["force"])]
            if len(force) != self.chart.dim:
                raise ConfigError("The force needs %s components" % self.chart.dim)
            return MechanicalSystem(self.chart, self.metric, ExprForm(self.chart, [Neg(f) for f in force]))
        if "work_form" in doc:
            return MechanicalSystem(self.chart, self.metric, ExprForm(self.chart, _listed(doc["work_form"])))
        return MechanicalSystem(self.chart, self.metric)

    def _build_constraints(self):
        section = self.document.get("constraints")
        if section is None:
            return None
        if not isinstance(section, dict):
            raise ConfigError("[constraints] is a section with 'functions' or form1, form2..")
        forms = self._numbered("constraints")
        if "functions" in section and forms:
            raise ConfigError("Give constraints either as holonomic 'functions' or as form1, form2..")
        if "functions" in section:
            return ConstraintSystem.holonomic(self.chart, _listed(section["functions"]))
        if not forms:
            raise ConfigError("The [constraints] section needs 'functions' or form1, form2..")
        return ConstraintSystem(self.chart, forms)

    def _time_form(self, chart, given):
        if isinstance(given, str):
            given = given.strip()
            if given.startswith("d(") and given.endswith(")"):
                return TimeForm.exact(chart, given[2:-1])
            if given.startswith("d"):
                return TimeForm.coordinate(chart, given[1:])
            raise ConfigError("A time form is written 'd<coordinate>' or 'd(<expression>)', got '%s'" % given)
        if "function" in given:
            return TimeForm.exact(chart, given["function"])
        if "coordinate" in given:
            return TimeForm.coordinate(chart, given["coordinate"])
        if "components" in given:
            return TimeForm(chart, _listed(given["components"]))
        raise ConfigError("The time form needs 'components', 'function' or 'coordinate'")

    def _build_time_form(self):
        given = self.document.get("time_form")
        if given is None:
            return None
        return self._time_form(self.chart, given)

    def _certify_time_forms(self):
        """Checks time forms given by components closed at the sample points"""
        points = self.sampling.points()
        if self.time_form is not None and not self.time_form.closed_verified:
            self.time_form.verify_closed(points)
        if self.leaf_time_form is not None and not self.leaf_time_form.closed_verified:
            if self.leaf.inverse is None:
                raise ConfigError(
                    "A leaf time form given by components is checked closed at the sample points "
                    "mapped to the leaf, which needs the leaf 'inverse'"
                )
            self.leaf_time_form.verify_closed([self.leaf.inverse.at(q) for q in points])

    def _build_frame(self):
        given = self.document.get("frame")
        if given is None:
            return None
        if not isinstance(given, dict):
            raise ConfigError("[frame] is a section with a 'group' or a 'map' and its 'inverse'")
        if "group" in given:
            name = given["group"]
            if name not in BUILTIN_FRAMES:
                raise ConfigError(
                    "Unknown frame group '%s', choose from %s%s"
                    % (name, sorted(BUILTIN_FRAMES), _suggest(name, BUILTIN_FRAMES))
                )
            kwargs = {}
            if "direction" in given:
                kwargs["direction"] = [float(d) for d in _listed(given["direction"])]
            if "plane" in given:
                kwargs["plane"] = _listed(given["plane"])
            if "rate" in given:
                kwargs["rate"] = float(given["rate"])
            try:
                return BUILTIN_FRAMES[name](self.chart, **kwargs)
            except TypeError:
                raise ConfigError("The %s frame does not take the parameters %s" % (name, sorted(kwargs)))
        if "map" not in given or "inverse" not in given:
            raise ConfigError("A frame is a built-in 'group' or an explicit 'map' with its 'inverse'")
        forward = _listed(given["map"])
        inverse = _listed(given["inverse"])
        if self.chart.names[0] == "t" and str(parse(forward[0])) == "t":
            return GroupFrame(self.chart, forward[1:], inverse[1:], "explicit")
        return Frame(self.chart, self.chart, forward, inverse)

    def _build_space_metric(self):
        """The metric g on M when the metric of R x M is dt^2 + g"""
        entries = self.metric.entries
        if self.chart.names[0] != "t":
            return None
        if not _constant(entries[0][0], 1.0):
            raise ConfigError("A frame on R x M needs g_tt = 1, got %s" % entries[0][0])
        for j in range(1, self.chart.dim):
            if not _constant(entries[0][j], 0.0):
                raise ConfigError("A frame on R x M needs g_t%s = 0, got %s" % (self.chart.names[j], entries[0][j]))
        for row in entries[1:]:
            for e in row[1:]:
                if "t" in e.variables:
                    raise ConfigError("The metric of M may not depend on t, got %s" % e)
        space = Chart(self.chart.names[1:])
        return ExprMetric(space, [row[1:] for row in entries[1:]])

    def _build_leaf(self):
        given = self.document.get("leaf")
        if given is None:
            return None, None
        chart = Chart(_listed(given.get("chart", [])))
        embedding = ChartMap(chart, self.chart, _listed(given.get("embedding", [])))
        inverse = ChartMap(self.chart, chart, _listed(given["inverse"])) if "inverse" in given else None
        tau = self._time_form(chart, given["time_form"]) if "time_form" in given else None
        return Leaf(embedding, inverse), tau

    def _build_integration(self):
        given = self.document.get("integration")
        if given is None:
            for name in ("monitors", "drift_tolerance"):
                if name in self.document:
                    raise ConfigError("[%s] belongs to a run and needs an [integration] section" % name, self._line(name))
            return None
        for key in ("h", "t_end", "state"):
            if key not in given:
                raise ConfigError("The integration section needs '%s'" % key)
        if not isinstance(given["state"], str):
            raise ConfigError("The state is quoted text 'q1, .., qn; qdot1, .., qdotn'")
        state = parse_state(given["state"], self.chart.dim)
        monitors = dict(self._section("monitors"))
        for name, source in monitors.items():
            if not isinstance(source, str):
                raise ConfigError("The monitor %s must be a quoted expression" % name, self._line(name))
            extra = parse(source).variables - self.chart.allowed_variables()
            if extra:
                raise ConfigError("The monitor %s uses unknown variables %s" % (name, sorted(extra)), self._line(name))
        drift = dict(self._section("drift_tolerance"))
        for name, value in drift.items():
            if isinstance(value, (str, bool, list)):
                raise ConfigError("The drift tolerance of %s must be a number" % name, self._line(name))
        return {
            "h": float(given["h"]),
            "t_end": float(given["t_end"]),
            "t0": float(given.get("t0", 0.0)),
            "state": state,
            "project": bool(given.get("project", False)),
            "monitors": monitors,
            "drift_tolerance": {name: float(value) for name, value in drift.items()},
        }

    def _build_sampling(self):
        given = dict(self._section("sampling"))
        n = self.chart.dim
        if "low" not in given or "high" not in given:
            center = self.integration["state"].q if self.integration else np.zeros(n)
            given.setdefault("low", [float(c) - 0.5 for c in center])
            given.setdefault("high", [float(c) + 0.5 for c in center])
        low = [float(x) for x in _listed(given["low"])]
        high = [float(x) for x in _listed(given["high"])]
        if len(low) != n:
            raise ConfigError("The sampling box needs %s coordinates per corner" % n)
        self.congruence_forms = int(given.pop("forms", 3))
        self.tolerance = float(given.pop("tolerance", 1e-7))
        return SampleBox(
            low,
            high,
            float(given.get("speed", 1.0)),
            int(given.get("samples", 64)),
            int(given.get("seed", 0)),
        )

    def _default_field(self):
        if self.frame is not None:
            return "transported"
        if self.time_form is not None and self.constraints is not None:
            return "time_dependent"
        if self.time_form is not None:
            return "time_constrained"
        if self.constraints is not None:
            return "constrained"
        return "free"

    def field(self, kind=None):
        """The second order field the document describes

        Args:
            kind (str, optional): One of FIELD_KINDS. Defaults to the document's field.

        Raises:
            ConfigError: The document lacks what the field needs

        Returns:
            SecondOrderField: The field
        """
        kind = kind or self.field_kind
        sys = self.system
        if kind == "free":
            return free_field(sys)
        if kind == "geodesic":
            return geodesic_field(sys)
        if kind in ("constrained", "orthonormal"):
            if self.constraints is None:
                raise ConfigError("The %s field needs a constraints section" % kind)
            build = constrained_field if kind == "constrained" else orthonormal_field
            return build(sys, self.constraints)
        if kind == "time_constrained":
            if self.time_form is None:
                raise ConfigError("The time constrained field needs a time_form")
            return modified_field(sys, self.time_form)
        if kind == "time_dependent":
            if self.time_form is None:
                raise ConfigError("The time dependent field needs a time_form")
            return time_dependent_field(sys, self.time_dependent(), self.assume_definite)
        if kind == "transported":
            if self.frame is None:
                raise ConfigError("The transported field needs a frame section")
            target = MechanicalSystem(self.frame.target, self.metric, work_form=sys.work_form)
            if self.time_form is not None:
                return transported_field(self.frame, modified_field(target, self.time_form))
            return transported_field(self.frame, free_field(target))
        raise ConfigError("Unknown field '%s'%s" % (kind, _suggest(kind, FIELD_KINDS)))

    def time_dependent(self):
        constraints = self.constraints or ConstraintSystem(self.chart, [])
        return TimeDependentConstraints(self.time_form, constraints)

    def monitors(self):
        """Monitors for simulate: T, H for a potential, constraint rates and levels, tau_dot and user expressions"""
        out = [kinetic_monitor(self.system)]
        if self.system.conservative:
            out.append(energy_monitor(self.system))
        if self.constraints is not None:
            out.extend(constraint_monitors(self.constraints))
            if self.constraints.is_holonomic:
                out.extend(level_monitors(self.constraints))
        if self.time_form is not None:
            out.append(time_monitor(self.time_form))
        if self.integration is not None:
            for name, source in self.integration["monitors"].items():
                out.append(expression_monitor(self.chart, name, source))
        return out

    def projector(self):
        """state -> (state, magnitude) keeping velocities admissible, None when projection is off"""
        if self.integration is None or not self.integration["project"]:
            return None
        forms = list(self.constraints or [])
        targets = [0.0] * len(forms)
        if self.time_form is not None:
            forms.insert(0, self.time_form.form)
            targets.insert(0, 1.0)
        return lambda state: project_velocity(self.system, forms, state, targets)

    def to_dict(self):
        """The document with every expression of the metric printed in normal form"""
        out = dict(self.document)
        if isinstance(out.get("metric"), dict):
            out["metric"] = {"row%s" % (i + 1): row for i, row in enumerate(self.metric.lower())}
        return out

    def dump(self):
        """Sectioned text that loads back to identical evaluators"""
        return write_sections(self.to_dict())

    def __str__(self):
        return "System %s on %s" % (self.name, self.chart)


def parse_config(text, source="<text>"):
    """Builds a system from sectioned key = value text

    Raises:
        ConfigError: Invalid text or an invalid definition, with the line when known

    Returns:
        SystemConfig: The system
    """
    return SystemConfig(read_sections(text), text, source)


def load_config(path_or_name):
    """Loads a system definition from a file or from the gallery

    Args:
        path_or_name (str): Path of a definition file, or the name of a bundled configuration

    Raises:
        ConfigError: Missing file, a syntax error (with its line) or an invalid definition

    Returns:
        SystemConfig: The system
    """
    path = path_or_name
    if not os.path.isfile(path):
        path = "%s/%s%s" % (gallery_dir, path_or_name, EXTENSION)
        if not os.path.isfile(path):
            raise ConfigError(
                "'%s' is neither a file nor a gallery configuration%s"
                % (path_or_name, _suggest(path_or_name, gallery_names()))
            )
    with open(path) as f:
        text = f.read()
    return SystemConfig(read_sections(text), text, path)
