import numpy as np

BANDED = 1
SPARSE_LU = 2
ITERATIVE = 3

# Above this many interior nodes a symmetric system may use the iterative backend
ITERATIVE_THRESHOLD = 100_000

BACKEND_NAMES = {
    BANDED: "banded",
    SPARSE_LU: "sparse_lu",
    ITERATIVE: "iterative",
}


class GreenboundError(Exception):
    pass


class DomainError(GreenboundError, ValueError):
    pass


class OutOfRangeError(DomainError):
    pass


class AssemblyError(GreenboundError):
    pass


class EllipticityError(GreenboundError):
    pass


class SolverError(GreenboundError):
    pass


class PreconditionError(GreenboundError, ValueError):
    pass


class ConvergenceError(GreenboundError):
    pass


class ConfigError(GreenboundError, ValueError):
    def __init__(self, message, field=None, line=None, column=None):
        self.field = field
        self.line = line
        self.column = column
        location = []
        if field is not None:
            location.append(f"field {field}")
        if line is not None:
            location.append(f"line {line}, column {column}")
        if location:
            message = f"{message} ({'; '.join(location)})"
        super().__init__(message)


class FactorizationPrototype:
    """
    Common surface of the factorization backends.

    A backend factors the interior block of -A_h once and then serves
    read-only solves; every call allocates its own output buffer so one
    factorization can be shared between threads.
    """
    backend = 0

    def __init__(self, matrix):
        self.shape = matrix.shape

    def solve(self, rhs):
        pass

    def check_rhs(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.shape[0]:
            raise SolverError(
                f"Right-hand side has {rhs.shape[0]} rows, system has {self.shape[0]}"
            )
        if not np.all(np.isfinite(rhs)):
            raise SolverError("Right-hand side contains non-finite values")
        return rhs

    def check_solution(self, x):
        if not np.all(np.isfinite(x)):
            raise SolverError(f"{BACKEND_NAMES.get(self.backend, 'backend')} solve returned non-finite values")
        return x
