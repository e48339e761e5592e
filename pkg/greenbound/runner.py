import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np
from loguru import logger

from ._prototype import BACKEND_NAMES, ConfigError, ConvergenceError, GreenboundError, SolverError
from .config import deep_set
from .estimates import verify_sandwich, verify_supersolution
from .green import apply_operator, green_selftest
from .init import experiment_init
from .nonlinearity import psi_eval
from .phi_transform import phi_closed_form, has_closed_form
from .report import write_csv, write_json, coordinate_header
from .semilinear import solve_dirichlet, pde_residual

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2

DEFAULT_PARALLEL_RUNS = 4


def exit_code_for(error):
    """Failed numerics map to 2, everything else the caller got wrong to 1."""
    if isinstance(error, (ConvergenceError, SolverError)):
        return EXIT_VIOLATION
    return EXIT_USAGE


@dataclass
class RunOutcome:
    exit_code: int
    files: List[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _experiment_summary(exp):
    return {
        "family": exp.psi.family,
        "params": exp.psi.to_dict()["params"],
        "c": exp.psi.c,
        "ell": exp.transform.ell,
        "dim": exp.grid.dim,
        "grid": exp.grid.kind,
        "interior_nodes": exp.grid.n_interior,
        "operator": exp.op.name,
        "scheme": exp.op.scheme,
        "backend": BACKEND_NAMES[exp.system.backend],
    }


def run_solve(config, out_dir=None):
    exp = experiment_init(config, out_dir)
    result = solve_dirichlet(exp.system, exp.xi, exp.psi, exp.f, exp.g, exp.solver)
    grid = exp.grid
    n = grid.n_interior

    u = result.u.values
    local = np.zeros(grid.n_active)
    local[:n] = np.abs(-apply_operator(exp.system, u) + exp.xi.interior * psi_eval(exp.psi, u[:n]) - exp.g.interior)

    header = ["node_index"] + coordinate_header(grid.dim) + ["u", "s", "residual_local"]
    rows = ([k] + grid.coords[k].tolist() + [u[k], result.s.values[k], local[k]] for k in range(grid.n_active))
    files = [write_csv(os.path.join(exp.output_dir, "solution.csv"), header, rows)]

    summary = _experiment_summary(exp)
    summary.update({
        "iterations": result.iterations,
        "residual": result.residual,
        "converged": result.converged,
        "relaxation": result.relaxation,
        "pde_residual": pde_residual(exp.system, result.u, exp.xi, exp.psi, exp.g),
    })
    files.append(write_json(os.path.join(exp.output_dir, "solution_summary.json"), summary))
    code = EXIT_OK if result.converged else EXIT_VIOLATION
    logger.info(f"solve finished: converged={result.converged} iterations={result.iterations}")
    return RunOutcome(code, files, summary)


def run_verify_bounds(config, out_dir=None):
    exp = experiment_init(config, out_dir)
    summary = _experiment_summary(exp)
    files = []
    try:
        report = verify_sandwich(exp.system, exp.xi, exp.psi, exp.transform, exp.f, exp.g, exp.solver)
    except ConvergenceError as e:
        logger.error(str(e))
        summary.update({"converged": False, "error": str(e)})
        files.append(write_json(os.path.join(exp.output_dir, "bounds_summary.json"), summary))
        return RunOutcome(EXIT_VIOLATION, files, summary)

    grid = exp.grid
    header = ["node_index"] + coordinate_header(grid.dim) + ["u", "reference", "lower", "slack_lower", "slack_upper"]
    rows = ([r["node_index"]] + r["coords"] + [r["u"], r["reference"], r["lower"], r["slack_lower"], r["slack_upper"]]
            for r in report.records())
    files.append(write_csv(os.path.join(exp.output_dir, "bounds.csv"), header, rows))

    summary.update(report.summary())
    summary["converged"] = True

    # supersolution built from the problem with source 2g
    doubled = exp.g.with_values(2.0 * exp.g.values)
    sup = solve_dirichlet(exp.system, exp.xi, exp.psi, exp.f, doubled, exp.solver)
    passed = report.passed
    if sup.converged:
        sup_report = verify_supersolution(exp.system, exp.xi, exp.psi, exp.transform, exp.g, sup.u, exp.solver)
        summary["supersolution"] = sup_report.summary()
        passed = passed and sup_report.passed
    else:
        summary["supersolution"] = {"converged": False}
        passed = False

    summary["pass"] = passed
    files.append(write_json(os.path.join(exp.output_dir, "bounds_summary.json"), summary))
    logger.info(f"verify-bounds: violated_node_count={report.violated_node_count} pass={passed}")
    return RunOutcome(EXIT_OK if passed else EXIT_VIOLATION, files, summary)


def run_phi_table(config, out_dir=None):
    exp = experiment_init(config, out_dir)
    tr = exp.transform
    t_max = float(exp.phi_table.get("t_max", 10.0))
    samples = int(exp.phi_table.get("samples", 1001))
    if not t_max > 0 or samples < 2:
        raise ConfigError("phi_table needs t_max > 0 and at least 2 samples", field="phi_table")

    t = np.linspace(0.0, t_max, samples)
    phi = tr.phi(t)
    closed = has_closed_form(exp.psi)
    reference = phi_closed_form(exp.psi.family, exp.psi.params, exp.psi.c, t) if closed else None

    def row(k):
        theta = tr.theta(t[k]) if 0.0 < t[k] <= 1.0 else None
        return [t[k], theta, phi[k], reference[k] if closed else None]

    files = [write_csv(os.path.join(exp.output_dir, "phi_table.csv"), ["t", "theta", "phi", "phi_closed_form"],
                       (row(k) for k in range(samples)))]
    summary = _experiment_summary(exp)
    summary["finite_ell_detected"] = tr.finite_ell_detected
    summary["max_closed_form_deviation"] = float(np.max(np.abs(phi - reference))) if closed else None
    files.append(write_json(os.path.join(exp.output_dir, "phi_table_summary.json"), summary))
    return RunOutcome(EXIT_OK, files, summary)


def run_green_selftest(config, out_dir=None):
    exp = experiment_init(config, out_dir)
    report = green_selftest(exp.system, seed=exp.seed)
    files = [write_json(os.path.join(exp.output_dir, "green_selftest.json"), report)]
    passed = all(check["pass"] for check in report.values())
    logger.info(f"green-selftest: pass={passed}")
    return RunOutcome(EXIT_OK if passed else EXIT_VIOLATION, files, report)


def parse_values(text):
    """'0.5,1,2' -> [0.5, 1, 2]; entries that are not JSON stay strings."""
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(json.loads(item))
        except json.JSONDecodeError:
            values.append(item)
    if not values:
        raise ConfigError("--values needs at least one entry")
    return values


def run_sweep(config, parameter, values, out_dir=None, runner=None):
    """One verify-bounds run per value of a dotted config parameter."""
    runner = runner or run_verify_bounds
    base = out_dir or config.get("output", {}).get("dir", None) or "."
    workers = int(config.get("max_parallel_runs", DEFAULT_PARALLEL_RUNS))

    def one(value):
        label = f"{parameter}={value}"
        run_dir = os.path.join(base, label)
        try:
            outcome = runner(deep_set(config, parameter, value), run_dir)
        except GreenboundError as e:
            logger.error(f"{label}: {e}")
            return {"value": value, "dir": label, "exit_code": exit_code_for(e), "error": str(e)}
        return {"value": value, "dir": label, "exit_code": outcome.exit_code}

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        runs = list(pool.map(one, values))

    code = max(r["exit_code"] for r in runs) if runs else EXIT_OK
    summary = {"parameter": parameter, "runs": runs, "exit_code": code}
    files = [write_json(os.path.join(base, "sweep_summary.json"), summary)]
    return RunOutcome(code, files, summary)
