"""Sobolev gradient preconditioning: factorize (I + lam*L) once, solve per step."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class FactorizationError(RuntimeError):
    pass


class PrecondSolver:
    """Reusable sparse factorization of (I + lam*L); identity when lam == 0."""

    def __init__(self, laplacian: sp.spmatrix, lam: float):
        if lam < 0:
            raise ValueError(f"lam must be non-negative, got {lam}")
        self.lam = float(lam)
        self.n = laplacian.shape[0]
        if lam == 0.0:
            self._solve = None
            return
        system = (sp.identity(self.n, format="csc") + lam * laplacian.tocsc())
        try:
            self._solve = spla.factorized(system)
        except RuntimeError as e:  # singular / non-SPD input
            raise FactorizationError(f"failed to factorize (I + {lam}*L): {e}") from e

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve (I + lam*L) x = b; b may be (n,) or (n, k), per-column."""
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise ValueError(f"rhs has {b.shape[0]} rows, system has {self.n}")
        if self._solve is None:
            return b.copy()
        if b.ndim == 1:
            return self._solve(b)
        return np.column_stack([self._solve(b[:, k]) for k in range(b.shape[1])])


def build_preconditioner(laplacian: sp.spmatrix, lam: float) -> PrecondSolver:
    return PrecondSolver(laplacian, lam)


def precondition_gradient(solver: PrecondSolver, grad: np.ndarray) -> np.ndarray:
    """(I + lam*L)^-1 grad, applied independently per coordinate channel."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape[0] != solver.n:
        raise ValueError(f"gradient has {grad.shape[0]} rows, expected {solver.n}")
    return solver.solve(grad)
