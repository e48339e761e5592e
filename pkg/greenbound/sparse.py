import numpy as np
from scipy.sparse.linalg import splu
from ._prototype import FactorizationPrototype, SolverError, SPARSE_LU


class SparseLUFactorization(FactorizationPrototype):
    backend = SPARSE_LU

    def __init__(self, matrix):
        super().__init__(matrix)
        try:
            self.lu = splu(matrix.tocsc())
        except RuntimeError as e:
            # SuperLU reports an exactly singular factor as RuntimeError
            raise SolverError(f"Sparse LU factorization failed: {e}")

    def solve(self, rhs):
        rhs = self.check_rhs(rhs)
        x = self.lu.solve(np.array(rhs, dtype=float, copy=True))
        return self.check_solution(x)
