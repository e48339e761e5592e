import numpy as np
from scipy.linalg import solve_banded
from ._prototype import FactorizationPrototype, SolverError, BANDED


class BandedFactorization(FactorizationPrototype):
    """Tridiagonal (1D) systems stored in LAPACK banded layout."""
    backend = BANDED

    def __init__(self, matrix):
        super().__init__(matrix)
        coo = matrix.tocoo()
        nonzero = coo.data != 0
        if nonzero.any():
            width = int(np.max(np.abs(coo.row[nonzero] - coo.col[nonzero])))
            if width > 1:
                raise SolverError(f"Banded backend needs a tridiagonal matrix, got bandwidth {width}")

        n = matrix.shape[0]
        ab = np.zeros((3, n))
        ab[0, 1:] = matrix.diagonal(1)
        ab[1, :] = matrix.diagonal(0)
        ab[2, :-1] = matrix.diagonal(-1)
        self.ab = ab

    def solve(self, rhs):
        rhs = self.check_rhs(rhs)
        try:
            # ab is never overwritten, so concurrent solves stay safe
            x = solve_banded((1, 1), self.ab, rhs, check_finite=False)
        except np.linalg.LinAlgError as e:
            raise SolverError(f"Banded solve failed: {e}")
        return self.check_solution(x)
