import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import cg
from ._prototype import FactorizationPrototype, SolverError, ITERATIVE


class ConjugateGradientFactorization(FactorizationPrototype):
    """
    Jacobi-preconditioned conjugate gradients for large symmetric systems.

    Nothing is factored; the "factorization" keeps the matrix and the
    preconditioner so the same object works as a drop-in backend.
    """
    backend = ITERATIVE

    def __init__(self, matrix, rtol=1e-12, maxiter=None):
        super().__init__(matrix)
        self.matrix = matrix.tocsr()
        self.rtol = rtol
        self.maxiter = maxiter or 10 * matrix.shape[0]
        self.preconditioner = diags(1.0 / self.matrix.diagonal())

    def solve(self, rhs):
        rhs = self.check_rhs(rhs)
        if not np.any(rhs):
            return np.zeros_like(rhs)
        x, info = cg(self.matrix, rhs, rtol=self.rtol, atol=0.0,
                     maxiter=self.maxiter, M=self.preconditioner)
        if info != 0:
            raise SolverError(f"Conjugate gradients stopped without convergence (info={info})")
        return self.check_solution(x)
