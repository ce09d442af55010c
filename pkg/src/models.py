"""Node models: per-node-type vector fields and the built-in catalogue."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from src.network import NetlabError

logger = logging.getLogger("netlab.models")

VARIADIC = "variadic"
ANY_ARROW = "*"

Inputs = Mapping[str, Sequence[np.ndarray]]
Params = Mapping[str, float]


class ModelError(NetlabError):
    """Raised when a node model is missing, malformed or mismatched."""
    pass


class ArityError(ModelError):
    """Raised when a node's input count disagrees with its model's arity."""
    pass


@dataclass(frozen=True)
class NodeModel:
    """Vector field for one node type.

    `rhs(t, own, inputs, params)` receives the inputs grouped by arrow type, each
    group in arrow-id order. `d_own` and `d_input` are optional analytic partials;
    without them the Jacobian falls back to finite differences.
    """

    name: str
    state_dim: int
    rhs: Callable[[float, np.ndarray, Inputs, Params], np.ndarray]
    arity: Mapping[str, int | str] = field(default_factory=lambda: {ANY_ARROW: VARIADIC})
    d_own: Optional[Callable[[float, np.ndarray, Inputs, Params], np.ndarray]] = None
    d_input: Optional[Callable[[float, np.ndarray, Inputs, Params, str, int], np.ndarray]] = None
    forcing_period: Optional[float] = None
    breakpoints: Optional[Callable[[float, float, Params], list[float]]] = None
    defaults: Mapping[str, float] = field(default_factory=dict)

    @property
    def nonautonomous(self) -> bool:
        return self.forcing_period is not None

    @property
    def analytic(self) -> bool:
        return self.d_own is not None and self.d_input is not None

    def check_arity(self, counts: Mapping[str, int]) -> Optional[str]:
        """Return a message when input counts per arrow type break the arity, else None."""
        for arrow_type, count in counts.items():
            allowed = self.arity.get(arrow_type, self.arity.get(ANY_ARROW))
            if allowed is None:
                return f"model {self.name!r} accepts no {arrow_type!r} inputs"
            if allowed != VARIADIC and count != allowed:
                return f"model {self.name!r} needs {allowed} {arrow_type!r} inputs, got {count}"
        for arrow_type, allowed in self.arity.items():
            if arrow_type != ANY_ARROW and allowed != VARIADIC and arrow_type not in counts and allowed != 0:
                return f"model {self.name!r} needs {allowed} {arrow_type!r} inputs, got 0"
        return None


def _param(params: Params, defaults: Mapping[str, float], name: str) -> float:
    return float(params.get(name, defaults[name]))


def _sum_first(inputs: Inputs) -> float:
    return float(sum(v[0] for group in inputs.values() for v in group))


def _sum_all(inputs: Inputs, dim: int) -> np.ndarray:
    total = np.zeros(dim)
    for group in inputs.values():
        for v in group:
            total += v
    return total


# --- FitzHugh-Nagumo ---------------------------------------------------------

FHN_DEFAULTS = {"a": 0.1, "b": 0.08, "gamma": 0.1, "I": 0.25, "mu": -0.05}


def fhn_voltage(**overrides: float) -> NodeModel:
    """FitzHugh-Nagumo cell coupled through the voltage of its inputs."""
    defaults = {**FHN_DEFAULTS, **overrides}

    def rhs(t, own, inputs, params):
        a = _param(params, defaults, "a")
        v, w = own
        dv = v * (a - v) * (v - 1.0) - w + _param(params, defaults, "I")
        dv += _param(params, defaults, "mu") * _sum_first(inputs)
        dw = _param(params, defaults, "b") * v - _param(params, defaults, "gamma") * w
        return np.array([dv, dw])

    def d_own(t, own, inputs, params):
        a = _param(params, defaults, "a")
        v = own[0]
        return np.array([
            [-3.0 * v * v + 2.0 * (a + 1.0) * v - a, -1.0],
            [_param(params, defaults, "b"), -_param(params, defaults, "gamma")],
        ])

    def d_input(t, own, inputs, params, arrow_type, index):
        return np.array([[_param(params, defaults, "mu"), 0.0], [0.0, 0.0]])

    return NodeModel("fhn_voltage", 2, rhs, d_own=d_own, d_input=d_input, defaults=defaults)


# --- Stuart-Landau -----------------------------------------------------------

SL_DEFAULTS = {"omega": 1.0, "mu": 0.0}


def stuart_landau(**overrides: float) -> NodeModel:
    """Hopf normal form z' = (1 + i omega) z - |z|^2 z + mu * sum of input z."""
    defaults = {**SL_DEFAULTS, **overrides}

    def rhs(t, own, inputs, params):
        omega = _param(params, defaults, "omega")
        x, y = own
        r2 = x * x + y * y
        coupling = _param(params, defaults, "mu") * _sum_all(inputs, 2)
        return np.array([
            x - omega * y - r2 * x + coupling[0],
            omega * x + y - r2 * y + coupling[1],
        ])

    def d_own(t, own, inputs, params):
        omega = _param(params, defaults, "omega")
        x, y = own
        return np.array([
            [1.0 - 3.0 * x * x - y * y, -omega - 2.0 * x * y],
            [omega - 2.0 * x * y, 1.0 - x * x - 3.0 * y * y],
        ])

    def d_input(t, own, inputs, params, arrow_type, index):
        return _param(params, defaults, "mu") * np.eye(2)

    return NodeModel("stuart_landau", 2, rhs, d_own=d_own, d_input=d_input, defaults=defaults)


# --- Nonautonomous linear counterexamples ------------------------------------


def my_matrix(t: float) -> np.ndarray:
    """Periodic matrix with eigenvalues -1/4 +- i sqrt(7)/4 for every t."""
    c, s = np.cos(t), np.sin(t)
    return np.array([
        [-1.0 + 1.5 * c * c, 1.0 - 1.5 * s * c],
        [-1.0 - 1.5 * s * c, -1.0 + 1.5 * s * s],
    ])


def my_linear(**overrides: float) -> NodeModel:
    defaults = {"mu": 0.0, **overrides}

    def rhs(t, own, inputs, params):
        return my_matrix(t) @ own + _param(params, defaults, "mu") * _sum_all(inputs, 2)

    def d_own(t, own, inputs, params):
        return my_matrix(t)

    def d_input(t, own, inputs, params, arrow_type, index):
        return _param(params, defaults, "mu") * np.eye(2)

    return NodeModel(
        "my_linear", 2, rhs, d_own=d_own, d_input=d_input,
        forcing_period=float(np.pi), defaults=defaults,
    )


SWITCH_A = np.array([[-0.5, 0.0], [2.0, -0.7]])
SWITCH_B = SWITCH_A.T.copy()
SWITCH_PERIOD = 2.0


def smoothstep(u: float) -> float:
    """C^1 ramp from 0 to 1 on [0, 1]."""
    u = min(max(u, 0.0), 1.0)
    return u * u * (3.0 - 2.0 * u)


def switch_weights(t: float, sigma: float) -> tuple[float, float]:
    """Weights (alpha, beta) of A and B at time t.

    B is active on [0, 1), A on [1, 2), period 2. Each ramp finishes before the
    other starts, so the matrix is always triangular with the common diagonal.
    """
    tau = t % SWITCH_PERIOD
    w = sigma / 2.0
    if w <= 0.0:
        return (0.0, 1.0) if tau < 1.0 else (1.0, 0.0)

    def window(u: float) -> float:
        if u < 0.0 or u >= 1.0:
            return 0.0
        if u < w:
            return smoothstep(u / w)
        if u > 1.0 - w:
            return smoothstep((1.0 - u) / w)
        return 1.0

    return window(tau - 1.0), window(tau)


def switch_matrix(t: float, sigma: float) -> np.ndarray:
    alpha, beta = switch_weights(t, sigma)
    diagonal = np.diag(np.diag(SWITCH_A))
    return diagonal + alpha * (SWITCH_A - diagonal) + beta * (SWITCH_B - diagonal)


def switch_linear(sigma: float = 1e-3, **overrides: float) -> NodeModel:
    """Linear node alternating between two stable triangular matrices, with C^1 ramps of width sigma."""
    defaults = {"mu": 0.0, **overrides}
    w = sigma / 2.0

    def rhs(t, own, inputs, params):
        return switch_matrix(t, sigma) @ own + _param(params, defaults, "mu") * _sum_all(inputs, 2)

    def d_own(t, own, inputs, params):
        return switch_matrix(t, sigma)

    def d_input(t, own, inputs, params, arrow_type, index):
        return _param(params, defaults, "mu") * np.eye(2)

    def breakpoints(t0, t1, params):
        marks = (0.0, w, 1.0 - w, 1.0, 1.0 + w, 2.0 - w) if w > 0 else (0.0, 1.0)
        first = int(np.floor(t0 / SWITCH_PERIOD))
        last = int(np.ceil(t1 / SWITCH_PERIOD))
        out = []
        for k in range(first, last + 1):
            for m in marks:
                b = k * SWITCH_PERIOD + m
                if t0 < b < t1:
                    out.append(b)
        return sorted(set(out))

    return NodeModel(
        "switch_linear", 2, rhs, d_own=d_own, d_input=d_input,
        forcing_period=SWITCH_PERIOD, breakpoints=breakpoints, defaults=defaults,
    )


# --- Scalar expression models -------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*^()]))")
_ALLOWED_NODES = (sp.Add, sp.Mul, sp.Pow, sp.tanh, sp.Symbol, sp.Number)


def _identifiers(text: str) -> list[str]:
    pos = 0
    names = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if not match or match.end() == pos:
            raise ModelError(f"unexpected character {text[pos:].lstrip()[:1]!r} in {text!r}")
        if match.group(2):
            names.append(match.group(2))
        pos = match.end()
    return names


def parse_scalar_expression(text: str) -> sp.Expr:
    """Parse the scalar grammar: numbers, names, + - * ^ **, parentheses and tanh(...)."""
    names = _identifiers(text)
    local = {name: sp.Symbol(name) for name in names if name != "tanh"}
    local["tanh"] = sp.tanh
    try:
        expr = parse_expr(
            text, local_dict=local, global_dict={"Integer": sp.Integer, "Float": sp.Float,
                                                 "Rational": sp.Rational, "Symbol": sp.Symbol},
            transformations=standard_transformations + (convert_xor,),
        )
    except (SyntaxError, TypeError, ValueError) as e:
        raise ModelError(f"cannot parse {text!r}: {e}") from None
    for node in sp.preorder_traversal(expr):
        if not isinstance(node, _ALLOWED_NODES):
            raise ModelError(f"{text!r} uses {type(node).__name__}, which the grammar does not allow")
    return expr


def scalar_generic(expression: str, arity: Optional[Mapping[str, int | str]] = None) -> NodeModel:
    """1-D node with dynamics given by an expression.

    `x` is the node's own state, `s` the sum of all inputs and `s_<type>` the sum of
    the inputs of one arrow type; any other name is a parameter.
    """
    expr = parse_scalar_expression(expression)
    symbols = sorted(expr.free_symbols, key=lambda s: s.name)
    x = sp.Symbol("x")
    s_total = sp.Symbol("s")
    typed = [s for s in symbols if s.name.startswith("s_")]
    param_names = [s.name for s in symbols if s not in (x, s_total) and s not in typed]
    args = [x, s_total, *typed, *(sp.Symbol(n) for n in param_names)]

    f = sp.lambdify(args, expr, modules="numpy")
    dx = sp.lambdify(args, sp.diff(expr, x), modules="numpy")
    ds = sp.lambdify(args, sp.diff(expr, s_total), modules="numpy")
    ds_typed = {s.name[2:]: sp.lambdify(args, sp.diff(expr, s), modules="numpy") for s in typed}

    def values(own, inputs, params):
        sums = {t: float(sum(v[0] for v in group)) for t, group in inputs.items()}
        try:
            p = [float(params[n]) for n in param_names]
        except KeyError as e:
            raise ModelError(f"expression {expression!r} needs parameter {e.args[0]!r}") from None
        return [float(own[0]), sum(sums.values()), *(sums.get(s.name[2:], 0.0) for s in typed), *p]

    def rhs(t, own, inputs, params):
        return np.array([float(f(*values(own, inputs, params)))])

    def d_own(t, own, inputs, params):
        return np.array([[float(dx(*values(own, inputs, params)))]])

    def d_input(t, own, inputs, params, arrow_type, index):
        v = values(own, inputs, params)
        total = float(ds(*v))
        if arrow_type in ds_typed:
            total += float(ds_typed[arrow_type](*v))
        return np.array([[total]])

    logger.debug("Compiled scalar model %r with parameters %s", expression, param_names)
    return NodeModel(
        f"scalar_generic({expression})", 1, rhs,
        arity=dict(arity) if arity is not None else {ANY_ARROW: VARIADIC},
        d_own=d_own, d_input=d_input,
    )


CATALOGUE: dict[str, Callable[..., NodeModel]] = {
    "fhn_voltage": fhn_voltage,
    "stuart_landau": stuart_landau,
    "my_linear": my_linear,
    "switch_linear": switch_linear,
    "scalar_generic": scalar_generic,
}


def build_model(spec: Mapping) -> NodeModel:
    """Instantiate a catalogue model from {"name": ..., options...}."""
    options = dict(spec)
    name = options.pop("name", None)
    if name not in CATALOGUE:
        raise ModelError(f"unknown model {name!r}; choose from {sorted(CATALOGUE)}")
    arity = options.pop("arity", None)
    try:
        model = CATALOGUE[name](**options)
    except TypeError as e:
        raise ModelError(f"model {name!r}: {e}") from None
    if arity is not None:
        model = replace(model, arity=dict(arity))
    return model


@dataclass(frozen=True)
class ModelFile:
    """Models per node type plus the orbit-search hints of a model file."""

    models: Mapping[str, NodeModel]
    seed: Optional[Mapping[int, tuple[float, ...]]] = None
    declared_period: Optional[float] = None


def model_file_from_dict(data: Mapping) -> ModelFile:
    if "models" not in data:
        raise ModelError("model file: missing field 'models'")
    models = {}
    for node_type, spec in data["models"].items():
        if isinstance(spec, str):
            spec = {"name": spec}
        try:
            models[node_type] = build_model(spec)
        except ModelError as e:
            raise ModelError(f"models.{node_type}: {e}") from None
    seed = None
    if "seed" in data:
        seed = {int(c): tuple(float(v) for v in values) for c, values in data["seed"].items()}
    period = data.get("declared_period")
    return ModelFile(models, seed, float(period) if period is not None else None)


def read_model_file(path: str | Path) -> ModelFile:
    return model_file_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def read_params(path: str | Path) -> dict[str, float]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, Mapping):
        raise ModelError(f"{path}: parameters must be a JSON object")
    try:
        return {str(k): float(v) for k, v in data.items()}
    except (TypeError, ValueError) as e:
        raise ModelError(f"{path}: {e}") from None
