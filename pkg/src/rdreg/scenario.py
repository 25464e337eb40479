"""Scenario configuration: a flat key = value text format with typed fields.

Values are numbers, booleans, quoted strings, or bracketed arrays (nested
once for the 2x2 generator). Initial conditions and disturbance shapes are
expression strings over a fixed whitelist: x, pi, sin, cos, and arithmetic.
Unknown keys are rejected with a line diagnostic; the emitted effective
config re-parses to an equal ScenarioConfig.
"""

import ast
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError
from .exo import ExoSpec
from .modal import min_truncation
from .numkit import rotation_generator
from .plantsim import PlantSpec

_ALLOWED_FUNCS = {"sin": np.sin, "cos": np.cos}
_ALLOWED_NAMES = {"pi": np.pi}


def eval_expression(expr, x, field=None):
    """Evaluate a whitelisted expression of x on a numpy array."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {expr!r}: {exc.msg}", field=field) from exc

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                return float(node.value)
            raise ConfigError(f"non-numeric literal in {expr!r}", field=field)
        if isinstance(node, ast.Name):
            if node.id == "x":
                return x
            if node.id in _ALLOWED_NAMES:
                return _ALLOWED_NAMES[node.id]
            raise ConfigError(f"unknown name {node.id!r} in {expr!r}", field=field)
        if isinstance(node, ast.BinOp):
            ops = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
                   ast.Div: np.divide, ast.Pow: np.power}
            fn = ops.get(type(node.op))
            if fn is None:
                raise ConfigError(f"operator not allowed in {expr!r}", field=field)
            return fn(walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -walk(node.operand)
            if isinstance(node.op, ast.UAdd):
                return +walk(node.operand)
            raise ConfigError(f"operator not allowed in {expr!r}", field=field)
        if isinstance(node, ast.Call):
            if isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_FUNCS \
                    and len(node.args) == 1 and not node.keywords:
                return _ALLOWED_FUNCS[node.func.id](walk(node.args[0]))
            raise ConfigError(f"call not allowed in {expr!r}", field=field)
        raise ConfigError(f"syntax not allowed in {expr!r}", field=field)

    return np.broadcast_to(np.asarray(walk(tree), dtype=float), np.shape(x)).copy()


@dataclass(frozen=True)
class ScenarioConfig:
    a: float
    tau: float
    delta: float
    omega: float
    grid_m: int = 100
    dt: float = 1e-3
    horizon: float = 60.0
    w0: str = "0"
    eps_hat0: str = ""  # empty means: same as w0
    p0: tuple = (1.0, 0.0)
    d1: tuple = ("0", "0")
    d2: tuple = (0.0, 0.0)
    d3: tuple = (0.0, 0.0)
    d4: tuple = (0.0, 0.0)
    g_matrix: tuple = ()  # empty means: rotation generator at omega
    n_modes: int = -1  # -1 means: truncation rule
    iota: float = 0.5
    kappa0: float = 5.0
    kappa1: float = 10.0
    ctrl_margin: float = 1.0
    ctrl_spread: float = 0.3
    obs_margin: float = 1.0
    obs_spread: float = 0.3
    lmi_seed: int = 0
    lmi_budget: int = 20000
    trace_every: int = 1
    snapshot_every: float = 0.1
    tail_window_frac: float = 0.5

    def design_order(self):
        return self.n_modes if self.n_modes >= 0 else min_truncation(self.a, self.delta)

    def generator(self):
        if self.g_matrix:
            return np.array(self.g_matrix, dtype=float)
        return rotation_generator(self.omega)


_FLOAT_KEYS = {"a", "tau", "delta", "omega", "dt", "horizon", "iota", "kappa0", "kappa1",
               "ctrl_margin", "ctrl_spread", "obs_margin", "obs_spread",
               "snapshot_every", "tail_window_frac"}
_INT_KEYS = {"grid_m", "n_modes", "lmi_seed", "lmi_budget", "trace_every"}
_STR_KEYS = {"w0", "eps_hat0"}
_ROW_KEYS = {"p0", "d2", "d3", "d4"}
_EXPR_ROW_KEYS = {"d1"}
_MATRIX_KEYS = {"g_matrix"}
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS | _ROW_KEYS | _EXPR_ROW_KEYS | _MATRIX_KEYS
_REQUIRED = {"a", "tau", "delta", "omega"}


def _parse_value(text, line_no):
    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"cannot parse value {text!r}", line=line_no) from exc
    return value


def parse_config_text(text):
    raw = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line=line_no)
        key, _, value_text = stripped.partition("=")
        key = key.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=line_no)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", line=line_no)
        raw[key] = (_parse_value(value_text.strip(), line_no), line_no)

    missing = _REQUIRED - set(raw)
    if missing:
        raise ConfigError(f"missing required keys: {sorted(missing)}", field=",".join(sorted(missing)))

    kwargs = {}
    for key, (value, line_no) in raw.items():
        if key in _FLOAT_KEYS:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{key} must be a number", line=line_no, field=key)
            kwargs[key] = float(value)
        elif key in _INT_KEYS:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{key} must be an integer", line=line_no, field=key)
            kwargs[key] = value
        elif key in _STR_KEYS:
            if not isinstance(value, str):
                raise ConfigError(f"{key} must be a quoted expression string", line=line_no, field=key)
            kwargs[key] = value
        elif key in _ROW_KEYS:
            if (not isinstance(value, (list, tuple)) or len(value) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
                raise ConfigError(f"{key} must be a numeric pair [a, b]", line=line_no, field=key)
            kwargs[key] = tuple(float(v) for v in value)
        elif key in _EXPR_ROW_KEYS:
            if (not isinstance(value, (list, tuple)) or len(value) != 2
                    or not all(isinstance(v, str) for v in value)):
                raise ConfigError(f"{key} must be a pair of expression strings", line=line_no, field=key)
            kwargs[key] = tuple(value)
        else:  # matrix
            ok = (isinstance(value, (list, tuple)) and len(value) == 2
                  and all(isinstance(r, (list, tuple)) and len(r) == 2 for r in value))
            if not ok:
                raise ConfigError(f"{key} must be a 2x2 nested array", line=line_no, field=key)
            kwargs[key] = tuple(tuple(float(v) for v in r) for r in value)

    cfg = ScenarioConfig(**kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg):
    checks = [
        (cfg.tau >= 0, "tau", "must be nonnegative"),
        (cfg.delta > 0, "delta", "must be positive"),
        (cfg.omega > 0, "omega", "must be positive"),
        (cfg.grid_m >= 20 and cfg.grid_m % 2 == 0, "grid_m", "must be even and >= 20"),
        (cfg.dt > 0, "dt", "must be positive"),
        (cfg.horizon > 0, "horizon", "must be positive"),
        (cfg.iota > 0, "iota", "must be positive"),
        (cfg.kappa0 > 1.0 / (4.0 * cfg.iota) if cfg.iota > 0 else False,
         "kappa0", "must exceed 1/(4 iota)"),
        (cfg.kappa1 > 0, "kappa1", "must be positive"),
        (cfg.trace_every >= 1, "trace_every", "must be >= 1"),
        (0 < cfg.tail_window_frac <= 1, "tail_window_frac", "must lie in (0, 1]"),
    ]
    for ok, field_name, msg in checks:
        if not ok:
            raise ConfigError(msg, field=field_name)
    # expressions must evaluate; surface errors at parse time
    probe = np.linspace(0.0, 1.0, 5)
    eval_expression(cfg.w0, probe, field="w0")
    if cfg.eps_hat0:
        eval_expression(cfg.eps_hat0, probe, field="eps_hat0")
    for i, expr in enumerate(cfg.d1):
        eval_expression(expr, probe, field=f"d1[{i}]")


def parse_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


def _emit_value(value):
    if isinstance(value, str):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        return "[" + ", ".join(_emit_value(v) for v in value) + "]"
    raise TypeError(f"cannot emit {value!r}")


def effective_config_text(cfg: ScenarioConfig):
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name == "g_matrix" and not value:
            continue
        lines.append(f"{f.name} = {_emit_value(value)}")
    return "\n".join(lines) + "\n"


def build_plant(cfg: ScenarioConfig) -> PlantSpec:
    x_nodes = np.linspace(0.0, 1.0, cfg.grid_m + 1)
    x_half = np.linspace(0.0, 1.0, 2 * cfg.grid_m + 1)
    w0 = eval_expression(cfg.w0, x_nodes, field="w0")
    d1_half = np.column_stack([
        eval_expression(cfg.d1[0], x_half, field="d1[0]"),
        eval_expression(cfg.d1[1], x_half, field="d1[1]"),
    ])
    return PlantSpec(cfg.a, cfg.tau, cfg.grid_m, cfg.dt, d1_half,
                     np.array(cfg.d2), np.array(cfg.d3), w0)


def build_exo(cfg: ScenarioConfig) -> ExoSpec:
    return ExoSpec(cfg.omega, cfg.generator(), np.array(cfg.p0), np.array(cfg.d4))


def observer_init(cfg: ScenarioConfig):
    x_nodes = np.linspace(0.0, 1.0, cfg.grid_m + 1)
    expr = cfg.eps_hat0 if cfg.eps_hat0 else cfg.w0
    return eval_expression(expr, x_nodes, field="eps_hat0")
