"""Run configuration for the command-line front end: JSON loading with
line-referenced errors, named boundary families and a small expression
grammar over x1..xn.
"""
from __future__ import annotations

import ast
import hashlib
import json
import operator
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .grid import Domain, read_grid

COMMANDS = ("solve", "audit-flatset", "certify", "barriers", "pogorelov", "modulus", "c2")
FAMILIES = ("quadratic", "sharp-example", "cone", "expr", "file")
DEFAULT_SEED = 20240601


class ConfigError(ValueError):
    """Malformed configuration; ``line`` refers to the config file when known."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(loc + message)
        self.path, self.line = path, line


@dataclass
class RunConfig:
    command: str = "solve"
    n: int = 3
    k: int = 2
    domain: dict = field(default_factory=lambda: {"kind": "ball", "R": 1.0})
    resolution: int = 32
    rhs: object = 1.0
    boundary: dict = field(default_factory=lambda: {"family": "quadratic"})
    input: str = "sample"
    nodes: object = "origin"
    deltas: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    r: float = None
    K: float = None
    h: float = 0.1
    H: float = 1.0
    delta: float = 1.0
    resolutions: list = None
    family_size: int = 10
    data: list = None
    wall: str = "wide"
    stability_tol: float = None
    out: str = "hessianlab-out"
    seed: int = DEFAULT_SEED
    base_dir: str = field(default=".", repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        return d

    def digest(self):
        """SHA-256 of the canonical JSON form (output directory excluded)."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def domain_obj(self):
        return Domain(self.domain.get("kind", "ball"), float(self.domain.get("R", 1.0)))


def _key_line(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def validate(cfg, text=None, path=None):
    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}", path, _key_line(text, key))

    if cfg.command not in COMMANDS:
        fail("command", f"unknown command {cfg.command!r}; expected one of {', '.join(COMMANDS)}")
    for key in ("n", "k", "resolution", "family_size", "seed"):
        if not isinstance(getattr(cfg, key), int) or isinstance(getattr(cfg, key), bool):
            fail(key, "must be an integer")
    if not 2 <= cfg.n <= 8:
        fail("n", f"dimension {cfg.n} outside 2..8")
    if not 1 <= cfg.k <= cfg.n:
        fail("k", f"order {cfg.k} outside 1..n")
    if cfg.command in ("solve", "pogorelov", "modulus", "c2"):
        if cfg.n not in (2, 3):
            fail("n", "solver commands need n in {2, 3}")
        if cfg.command == "solve" and cfg.k not in (1, 2):
            fail("k", "the solver handles k in {1, 2}")
    if cfg.resolution < 8:
        fail("resolution", "must be at least 8")
    if not isinstance(cfg.domain, dict) or cfg.domain.get("kind", "ball") not in ("box", "ball"):
        fail("domain", "expected {\"kind\": \"box\"|\"ball\", \"R\": radius}")
    if not float(cfg.domain.get("R", 1.0)) > 0:
        fail("domain", "R must be positive")
    if cfg.input not in ("sample", "solve"):
        fail("input", "must be 'sample' or 'solve'")
    if cfg.wall not in ("slab", "wide"):
        fail("wall", "must be 'slab' or 'wide'")
    if not (isinstance(cfg.deltas, list) and cfg.deltas and all(float(d) > 0 for d in cfg.deltas)):
        fail("deltas", "must be a nonempty list of positive numbers")
    for key in ("h", "H", "delta"):
        if not float(getattr(cfg, key)) > 0:
            fail(key, "must be positive")
    if cfg.r is not None and not float(cfg.r) > 0:
        fail("r", "must be positive")
    if cfg.resolutions is not None and not (
        isinstance(cfg.resolutions, list) and all(isinstance(v, int) and v >= 8 for v in cfg.resolutions)
    ):
        fail("resolutions", "must be a list of integers >= 8")
    specs = [cfg.boundary] + list(cfg.data or [])
    for spec in specs:
        try:
            boundary_function(spec, cfg.n, cfg.base_dir)
        except ConfigError as e:
            key = "data" if spec is not cfg.boundary else "boundary"
            fail(key, str(e))
    if isinstance(cfg.rhs, str):
        try:
            compile_expression(cfg.rhs, cfg.n)
        except ConfigError as e:
            fail("rhs", str(e))
    elif not isinstance(cfg.rhs, (int, float)):
        fail("rhs", "must be a number or an expression string")
    return cfg


def load_config(path=None, overrides=None, command=None):
    """Read a JSON config (optional), apply overrides, validate."""
    text, data, base = None, {}, "."
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError("config file not found", path)
        text = path.read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(e.msg, path, e.lineno) from None
        if not isinstance(data, dict):
            raise ConfigError("top level must be an object", path, 1)
        base = str(path.parent)
    known = {f.name for f in fields(RunConfig)} - {"base_dir"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", path, _key_line(text, key))
    if command is not None:
        if "command" in data and data["command"] != command:
            raise ConfigError(
                f"config is for command {data['command']!r}, not {command!r}", path, _key_line(text, "command")
            )
        data["command"] = command
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    cfg = RunConfig(**data, base_dir=base)
    return validate(cfg, text, path)


# -- expressions ----------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_CALLS = {"abs": lambda *a: np.abs(*a), "max": lambda *a: _fold(np.maximum, a),
          "min": lambda *a: _fold(np.minimum, a), "sqrt": lambda *a: np.sqrt(*a)}


def _fold(fn, args):
    out = args[0]
    for a in args[1:]:
        out = fn(out, a)
    return out


def compile_expression(src, n):
    """Vectorized function of points from an arithmetic expression in x1..xn.

    Grammar: numbers, x1..xn, + - * / ^ (power), parentheses, abs(.),
    max(., ...), min(., ...), sqrt(.).
    """
    if not isinstance(src, str) or not src.strip():
        raise ConfigError("expression must be a nonempty string")
    try:
        tree = ast.parse(src.replace("^", "**"), mode="eval")
    except SyntaxError as e:
        raise ConfigError(f"cannot parse expression {src!r}: {e.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return check(node.left) and check(node.right)
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return check(node.operand)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return True
        if isinstance(node, ast.Name):
            m = re.fullmatch(r"x([1-9][0-9]*)", node.id)
            if m and 1 <= int(m.group(1)) <= n:
                return True
            if node.id == "pi":
                return True
            raise ConfigError(f"unknown name {node.id!r} in expression (variables are x1..x{n})")
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _CALLS:
            if node.keywords or not node.args:
                raise ConfigError(f"bad call to {node.func.id} in expression")
            return all(check(a) for a in node.args)
        raise ConfigError(f"unsupported syntax in expression {src!r}")

    check(tree)

    def ev(node, x):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, x), ev(node.right, x))
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](ev(node.operand, x))
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return np.pi if node.id == "pi" else x[..., int(node.id[1:]) - 1]
        return _CALLS[node.func.id](*[ev(a, x) for a in node.args])

    body = tree.body

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(ev(body, x), dtype=float), x.shape[:-1]).copy()

    return f


# -- boundary families ---------------------------------------------------------------

def boundary_function(spec, n, base_dir="."):
    """Vectorized function of points for a boundary spec (see FAMILIES)."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError("boundary spec must be an object with a 'family' key")
    fam = spec["family"]
    if fam not in FAMILIES:
        raise ConfigError(f"unknown family {fam!r}; expected one of {', '.join(FAMILIES)}")
    scale = float(spec.get("scale", 1.0))
    if fam == "quadratic":
        if "A" in spec:
            A = np.asarray(spec["A"], dtype=float)
            if A.shape != (n, n):
                raise ConfigError(f"quadratic A must be {n}x{n}")
            A = 0.5 * (A + A.T)
        else:
            alpha = float(spec.get("alpha", np.sqrt(2.0 / (n * (n - 1)))))
            A = alpha * np.eye(n)
        b = np.asarray(spec.get("b", np.zeros(n)), dtype=float)
        c = float(spec.get("c", 0.0))
        if b.shape != (n,):
            raise ConfigError(f"quadratic b must have length {n}")
        return lambda x: scale * (0.5 * np.einsum("...i,ij,...j->...", np.asarray(x, float), A, np.asarray(x, float))
                                  + np.asarray(x, float) @ b + c)
    if fam == "sharp-example":
        return lambda x: scale * (x[..., 0] ** 2 + x[..., 1] ** 2)
    if fam == "cone":
        apex = np.asarray(spec.get("apex", np.zeros(n)), dtype=float)
        if apex.shape != (n,):
            raise ConfigError(f"cone apex must have length {n}")
        return lambda x: scale * np.linalg.norm(np.asarray(x, float) - apex, axis=-1)
    if fam == "expr":
        f = compile_expression(spec.get("expr"), n)
        return lambda x: scale * f(x)
    # file
    if "path" not in spec:
        raise ConfigError("file family needs a 'path'")
    p = Path(base_dir) / spec["path"]
    if not p.exists():
        raise ConfigError(f"grid file {str(p)!r} does not exist")
    u = read_grid(p, spec.get("domain", "box"))
    if u.n != n:
        raise ConfigError(f"grid file has dimension {u.n}, config has n = {n}")
    return _FileFunction(u, scale)


class _FileFunction:
    def __init__(self, u, scale):
        self.grid = u.with_values(scale * u.values)

    def __call__(self, x):
        return self.grid(x)


def grid_input(cfg):
    """Grid function described by the boundary spec, sampled on the configured grid."""
    from .grid import sample

    g = boundary_function(cfg.boundary, cfg.n, cfg.base_dir)
    if isinstance(g, _FileFunction):
        return g.grid
    return sample(g, cfg.n, cfg.resolution, cfg.domain_obj())


def rhs_function(cfg):
    if isinstance(cfg.rhs, str):
        return compile_expression(cfg.rhs, cfg.n)
    return float(cfg.rhs)


def resolve_nodes(cfg, u):
    """Sample nodes: 'origin', 'axis' (interior nodes on the x_n axis) or a list of points."""
    spec = cfg.nodes
    if spec == "origin":
        return [u.origin_node]
    if spec == "axis":
        o = u.origin_node
        out = []
        for i in range(u.resolution + 1):
            node = o[:-1] + (i,)
            if u.interior[node]:
                out.append(node)
        return out
    if isinstance(spec, list):
        return [u.nearest_node(p) for p in spec]
    raise ConfigError(f"nodes: expected 'origin', 'axis' or a list of points, got {spec!r}")


__all__ = [
    "COMMANDS", "ConfigError", "DEFAULT_SEED", "FAMILIES", "RunConfig",
    "boundary_function", "compile_expression", "grid_input", "load_config", "resolve_nodes",
    "rhs_function", "validate",
]
