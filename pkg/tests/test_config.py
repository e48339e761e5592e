import json
import os
import tempfile

import numpy as np
import pytest

from greenbound._prototype import ConfigError
from greenbound.config import read_json_file, deep_get, deep_set, check_and_get
from greenbound.expression import Expression, compile_field, compile_matrix_field, compile_vector_field
from greenbound.init import experiment_init, grid_init, operator_init, psi_init

TEST_CONFIG = os.path.join(os.path.dirname(__file__), "test.json")


@pytest.fixture
def config():
    return read_json_file(TEST_CONFIG)


def write_tmp(tmpdir, text, name="config.json"):
    path = os.path.join(tmpdir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# JSON config helpers
# ---------------------------------------------------------------------------

class TestConfigFile:
    def test_reads_fixture(self, config):
        assert config["grid"]["resolution"] == [63]
        assert config["psi"]["family"] == "power"

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="File not found"):
            read_json_file("/nonexistent/greenbound.json")

    def test_malformed_reports_position(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_tmp(tmpdir, '{\n  "grid": {\n    "dim": 1,,\n  }\n}')
            with pytest.raises(ConfigError) as excinfo:
                read_json_file(path)
        assert excinfo.value.line == 3
        assert "line 3" in str(excinfo.value)

    def test_utf8_bom(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_tmp(tmpdir, "\ufeff" + json.dumps({"seed": 3}))
            assert read_json_file(path) == {"seed": 3}

    def test_deep_get(self, config):
        assert deep_get(config, "psi.params.gamma") == 2
        assert deep_get(config, "psi.params.missing") is None
        assert deep_get(config, "xi.nested") is None

    def test_deep_set_copies(self, config):
        updated = deep_set(config, "psi.params.gamma", 0.5)
        assert updated["psi"]["params"]["gamma"] == 0.5
        assert config["psi"]["params"]["gamma"] == 2
        assert deep_set({}, "a.b.c", 1) == {"a": {"b": {"c": 1}}}

    def test_deep_set_through_scalar(self, config):
        with pytest.raises(ConfigError):
            deep_set(config, "xi.value", 1)

    def test_check_and_get(self, config):
        assert check_and_get(config, "grid.dim") == 1
        with pytest.raises(ConfigError, match="Require value grid.shape"):
            check_and_get(config, "grid.shape")


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------

class TestExpression:
    def test_arithmetic(self):
        coords = np.array([[0.5, 2.0], [1.0, 3.0]])
        np.testing.assert_allclose(Expression("1 + 2*x - y^2")(coords), [1 + 1 - 4, 1 + 2 - 9])

    def test_functions_and_pi(self):
        coords = np.array([[0.25]])
        value = Expression("sin(pi*x) + exp(0) + log(1) + cos(0)")(coords)
        np.testing.assert_allclose(value, [np.sin(np.pi / 4) + 2.0])

    def test_unary(self):
        np.testing.assert_allclose(Expression("-x + +1")(np.array([[2.0]])), [-1.0])

    def test_constant_broadcasts(self):
        expr = Expression("3")
        assert expr.is_constant
        np.testing.assert_array_equal(expr(np.zeros((4, 2))), [3.0] * 4)

    @pytest.mark.parametrize("text", [
        "__import__('os')", "x.real", "abs(x)", "z + 1", "x if x else 1", "x % 2", "'a'", "exp(x, 2)", "1 +",
    ])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            Expression(text, field="xi")

    def test_y_on_1d(self):
        with pytest.raises(ConfigError, match="uses y"):
            Expression("x + y")(np.array([[0.5]]))

    def test_compile_field(self):
        np.testing.assert_array_equal(compile_field(2)(np.zeros((3, 1))), [2.0, 2.0, 2.0])
        with pytest.raises(ConfigError):
            compile_field(True)
        with pytest.raises(ConfigError):
            compile_field([1, 2])

    def test_matrix_and_vector(self):
        coords = np.array([[1.0, 2.0]])
        a = compile_matrix_field([[1, "x"], ["y", 2]], 2, "operator.a")(coords)
        assert a.shape == (1, 2, 2)
        np.testing.assert_allclose(a[0], [[1, 1], [2, 2]])
        b = compile_vector_field(["x", 0], 2, "operator.b")(coords)
        np.testing.assert_allclose(b, [[1.0, 0.0]])
        with pytest.raises(ConfigError):
            compile_matrix_field([[1, 0]], 2, "operator.a")


# ---------------------------------------------------------------------------
# experiment init
# ---------------------------------------------------------------------------

class TestExperimentInit:
    def test_fixture(self, config):
        exp = experiment_init(config)
        assert exp.grid.n_interior == 63
        assert exp.psi.family == "power"
        assert exp.seed == 7
        assert exp.output_dir == "."
        np.testing.assert_array_equal(exp.g.interior, 1.0)

    def test_output_dir_precedence(self, config):
        config = deep_set(config, "output.dir", "from-config")
        assert experiment_init(config).output_dir == "from-config"
        assert experiment_init(config, "cli").output_dir == "cli"

    def test_rect_and_disk(self):
        rect = grid_init({"dim": 2, "bounds": [[0, 1], [0, 2]], "resolution": [4, 9]})
        assert rect.n_interior == 36
        disk = grid_init({"dim": 2, "disk": {"center": [0, 0], "radius": 1}, "resolution": 9})
        assert disk.kind == "disk"

    @pytest.mark.parametrize("grid_config", [
        {"dim": 3, "bounds": [[0, 1]], "resolution": [8]},
        {"dim": 1, "bounds": [[1, 0]], "resolution": [8]},
        {"dim": 1, "bounds": [[0, 1]], "resolution": [2]},
        {"dim": 1, "bounds": [[0, 1]], "resolution": ["8"]},
        {"dim": 2, "bounds": [[0, 1], [0, 1]], "resolution": [2000, 2000]},
        {"dim": 1, "resolution": [8]},
    ])
    def test_bad_grid(self, grid_config):
        with pytest.raises(ConfigError):
            grid_init(grid_config)

    def test_operator_from_expressions(self):
        op = operator_init({"a": [[1, 0], [0, "1 + x"]], "b": [0, 1], "cross_stencil": "skewed"}, 2)
        a, b = op.coefficients(np.array([[1.0, 0.0]]))
        np.testing.assert_allclose(a[0], [[1, 0], [0, 2]])
        np.testing.assert_allclose(b[0], [0, 1])
        assert op.cross_stencil == "skewed"

    def test_bad_operator(self):
        with pytest.raises(ConfigError):
            operator_init({"preset": "biharmonic"}, 1)
        with pytest.raises(ConfigError):
            operator_init({"preset": "laplacian_drift", "b": [1, 0]}, 1)
        with pytest.raises(ConfigError):
            operator_init({"preset": "laplacian", "scheme": "spectral"}, 1)

    def test_top_level_c(self, config):
        config = dict(config, c=2.5)
        assert psi_init(config).c == 2.5

    def test_bad_psi(self, config):
        with pytest.raises(ConfigError, match="psi"):
            psi_init(deep_set(config, "psi.family", "cubic"))

    def test_expression_data(self, config):
        config = dict(config, xi="1 + x", g="sin(pi*x)")
        exp = experiment_init(config)
        np.testing.assert_allclose(exp.xi.interior, 1 + exp.grid.coords[:63, 0])

    def test_non_finite_data(self, config):
        with pytest.raises(ConfigError, match="xi"):
            experiment_init(dict(config, xi="log(x - x)"))

    def test_bad_solver(self, config):
        with pytest.raises(ConfigError, match="solver"):
            experiment_init(deep_set(config, "solver.relaxation", 2))
