from dataclasses import dataclass, field
from typing import Optional

from loguru import logger

from ._prototype import ConfigError, DomainError
from .config import check_and_get
from .discrete_domain import (
    OperatorSpec, build_interval_grid, build_rect_grid, build_disk_grid,
    CENTERED, CORNER, MAX_INTERIOR_NODES,
)
from .expression import compile_field, compile_matrix_field, compile_vector_field
from .green import Field, GreenSystem, BOUNDARY_DATA, SOURCE
from .nonlinearity import PsiSpec
from .phi_transform import PhiTransform, NUMERIC
from .semilinear import SolveConfig


@dataclass
class Experiment:
    config: dict
    grid: object
    op: OperatorSpec
    system: GreenSystem
    psi: PsiSpec
    transform: PhiTransform
    xi: Field
    f: Field
    g: Field
    solver: SolveConfig
    output_dir: str
    seed: int = 0
    phi_table: dict = field(default_factory=dict)
    log: bool = False
    name: Optional[str] = None


def _pair(value, target):
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError("Expected [lo, hi]", field=target)
    return float(value[0]), float(value[1])


def _count(value, target):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"Expected an integer count, got {value!r}", field=target)
    return value


def grid_init(grid_config):
    dim = check_and_get(grid_config, "dim")
    resolution = check_and_get(grid_config, "resolution")
    if not isinstance(resolution, list):
        resolution = [resolution]
    counts = [_count(n, "grid.resolution") for n in resolution]

    total = 1
    for n in counts:
        total *= n
    if total > MAX_INTERIOR_NODES:
        raise ConfigError(f"{total} nodes exceed the limit of {MAX_INTERIOR_NODES}", field="grid.resolution")

    try:
        if dim == 1:
            bounds = check_and_get(grid_config, "bounds")
            if bounds and isinstance(bounds[0], list):
                bounds = bounds[0]
            lo, hi = _pair(bounds, "grid.bounds")
            return build_interval_grid(lo, hi, counts[0])
        if dim == 2:
            disk = grid_config.get("disk", None)
            if disk is not None:
                center = _pair(check_and_get(disk, "center"), "grid.disk.center")
                radius = check_and_get(disk, "radius")
                return build_disk_grid(center, radius, counts[0])
            bounds = check_and_get(grid_config, "bounds")
            if not (isinstance(bounds, list) and len(bounds) == 2):
                raise ConfigError("Expected [[x0, x1], [y0, y1]]", field="grid.bounds")
            if len(counts) == 1:
                counts = counts * 2
            return build_rect_grid((_pair(bounds[0], "grid.bounds[0]"), _pair(bounds[1], "grid.bounds[1]")),
                                   counts[0], counts[1])
    except DomainError as e:
        raise ConfigError(str(e), field="grid")
    raise ConfigError(f"grid.dim must be 1 or 2, got {dim!r}", field="grid.dim")


def operator_init(op_config, dim):
    scheme = op_config.get("scheme", CENTERED)
    cross = op_config.get("cross_stencil", CORNER)
    preset = op_config.get("preset", None)
    try:
        if preset == "laplacian":
            return OperatorSpec.laplacian(dim, scheme=scheme, cross_stencil=cross)
        if preset == "laplacian_drift":
            b = check_and_get(op_config, "b")
            if not (isinstance(b, list) and len(b) == dim):
                raise ConfigError(f"Expected a drift vector of length {dim}", field="operator.b")
            return OperatorSpec.laplacian_drift(b, scheme=scheme, cross_stencil=cross)
        if preset is not None:
            raise ConfigError(f"Unknown operator preset {preset!r}", field="operator.preset")

        a = compile_matrix_field(check_and_get(op_config, "a"), dim, "operator.a")
        b_spec = op_config.get("b", [0] * dim)
        b = compile_vector_field(b_spec, dim, "operator.b")
        return OperatorSpec(dim, a, b, scheme=scheme, cross_stencil=cross, name="expression")
    except DomainError as e:
        raise ConfigError(str(e), field="operator")


def psi_init(config):
    psi_config = dict(check_and_get(config, "psi"))
    if config.get("c", None) is not None:
        psi_config["c"] = config["c"]
    try:
        return PsiSpec.from_dict(psi_config)
    except DomainError as e:
        raise ConfigError(str(e), field="psi")


def data_init(config, grid, target, role, default=None):
    spec = config.get(target, default)
    if spec is None:
        raise ConfigError(f"Require value {target}", field=target)
    fn = compile_field(spec, field=target)
    try:
        return Field.from_function(grid, fn, role)
    except DomainError as e:
        raise ConfigError(str(e), field=target)


def experiment_init(config, output_dir=None):
    log = config.get("log", False)

    grid = grid_init(check_and_get(config, "grid"))
    logger.info(f"Grid initialized: {grid}")

    op = operator_init(config.get("operator", {"preset": "laplacian"}), grid.dim)
    system = GreenSystem(grid, op, log=log)
    logger.info(f"GreenSystem initialized ({op.name}, {op.scheme})")

    psi = psi_init(config)
    phi_table = dict(config.get("phi_table", {}))
    transform = PhiTransform(psi, mode=phi_table.get("mode", NUMERIC))
    logger.info(f"PhiTransform initialized: {transform}")

    xi = data_init(config, grid, "xi", SOURCE)
    f = data_init(config, grid, "f", BOUNDARY_DATA, default=0.0)
    g = data_init(config, grid, "g", SOURCE)

    try:
        solver = SolveConfig.from_dict(config.get("solver", {}))
    except (DomainError, TypeError) as e:
        raise ConfigError(str(e), field="solver")

    out = output_dir or config.get("output", {}).get("dir", None) or "."
    seed = config.get("seed", 0)
    return Experiment(config=config, grid=grid, op=op, system=system, psi=psi, transform=transform,
                      xi=xi, f=f, g=g, solver=solver, output_dir=out, seed=seed,
                      phi_table=phi_table, log=log, name=config.get("name", None))
