"""
Arithmetic expressions over node coordinates for coefficient and data fields.

Grammar: numbers, x, y, pi, + - * / ^ (power), unary minus, parentheses
and the functions exp, log, sin, cos. Anything else is rejected.
"""
import ast

import numpy as np

from ._prototype import ConfigError

FUNCTIONS = {"exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos}
CONSTANTS = {"pi": np.pi}
VARIABLES = ("x", "y")

_BINARY = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class Expression:

    def __init__(self, text, field=None):
        self.text = str(text)
        self.field = field
        try:
            tree = ast.parse(self.text.replace("^", "**"), mode="eval")
        except SyntaxError as e:
            raise ConfigError(f"Cannot parse expression {self.text!r}: {e.msg}", field=field)
        self.tree = tree.body
        self.variables = set()
        self._validate(self.tree)

    def __repr__(self):
        return f"Expression({self.text!r})"

    def _validate(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ConfigError(f"Unsupported literal {node.value!r} in {self.text!r}", field=self.field)
        elif isinstance(node, ast.Name):
            if node.id in VARIABLES:
                self.variables.add(node.id)
            elif node.id not in CONSTANTS:
                raise ConfigError(f"Unknown name {node.id!r} in {self.text!r}", field=self.field)
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINARY:
                raise ConfigError(f"Unsupported operator in {self.text!r}", field=self.field)
            self._validate(node.left)
            self._validate(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ConfigError(f"Unsupported unary operator in {self.text!r}", field=self.field)
            self._validate(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ConfigError(f"Unsupported function call in {self.text!r}", field=self.field)
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"{node.func.id} takes exactly one argument", field=self.field)
            self._validate(node.args[0])
        else:
            raise ConfigError(f"Unsupported syntax in {self.text!r}", field=self.field)

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else CONSTANTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINARY[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            value = self._eval(node.operand, env)
            return -value if isinstance(node.op, ast.USub) else value
        return FUNCTIONS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, coords):
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if "y" in self.variables and coords.shape[1] < 2:
            raise ConfigError(f"Expression {self.text!r} uses y on a 1D grid", field=self.field)
        env = {"x": coords[:, 0]}
        if coords.shape[1] > 1:
            env["y"] = coords[:, 1]
        with np.errstate(all="ignore"):
            value = self._eval(self.tree, env)
        return np.broadcast_to(np.asarray(value, dtype=float), (coords.shape[0],)).copy()

    @property
    def is_constant(self):
        return not self.variables


def compile_field(spec, field=None):
    """A number or expression string as a callable over coordinates."""
    if isinstance(spec, bool):
        raise ConfigError("Expected a number or an expression", field=field)
    if isinstance(spec, (int, float)):
        value = float(spec)
        return lambda coords: np.full(np.atleast_2d(coords).shape[0], value)
    if isinstance(spec, str):
        return Expression(spec, field=field)
    raise ConfigError(f"Expected a number or an expression, got {type(spec).__name__}", field=field)


def compile_matrix_field(rows, dim, field=None):
    """d x d nested list of numbers/expressions as coords -> (n, d, d)."""
    if not isinstance(rows, list) or len(rows) != dim or any(not isinstance(r, list) or len(r) != dim for r in rows):
        raise ConfigError(f"Expected a {dim}x{dim} matrix", field=field)
    entries = [[compile_field(v, f"{field}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(rows)]

    def evaluate(coords):
        coords = np.atleast_2d(coords)
        return np.stack([np.stack([e(coords) for e in r], axis=-1) for r in entries], axis=-2)
    return evaluate


def compile_vector_field(items, dim, field=None):
    if not isinstance(items, list) or len(items) != dim:
        raise ConfigError(f"Expected a list of {dim} entries", field=field)
    entries = [compile_field(v, f"{field}[{i}]") for i, v in enumerate(items)]

    def evaluate(coords):
        coords = np.atleast_2d(coords)
        return np.stack([e(coords) for e in entries], axis=-1)
    return evaluate
