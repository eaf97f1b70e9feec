"""Quadratic Hamiltonian H(p) = 1/2 Ap.p and its Legendre dual L(q) = 1/2 A^{-1}q.q."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

MAX_DIMENSION = 8

SYMMETRY_TOL = 1e-12
INVERSE_TOL = 1e-10


@dataclass(frozen=True)
class SpdForm:
    """A symmetric positive definite matrix A with cached inverse and spectral bounds.

    ``lambda_min`` / ``lambda_max`` are the extreme values of A^{-1}z.z over unit
    vectors z, i.e. the extreme eigenvalues of A^{-1}.  They bound the Lagrangian:
    lambda_min |z|^2 / 2 <= L(z) <= lambda_max |z|^2 / 2.
    """

    n: int
    a: np.ndarray
    a_inv: np.ndarray
    lambda_min: float
    lambda_max: float

    @classmethod
    def from_matrix(cls, a) -> "SpdForm":
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        n = a.shape[0]
        if n < 1 or n > MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}], got {n}")
        if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
            raise ValueError("matrix is not symmetric within 1e-12")
        try:
            factor = cho_factor(a)
        except LinAlgError as exc:
            raise ValueError("matrix is not positive definite") from exc
        a_inv = cho_solve(factor, np.eye(n))
        a_inv = 0.5 * (a_inv + a_inv.T)
        if np.max(np.abs(a @ a_inv - np.eye(n))) > INVERSE_TOL:
            raise ValueError("inverse verification failed (badly conditioned matrix)")
        eigs = np.linalg.eigvalsh(a_inv)
        a.setflags(write=False)
        a_inv.setflags(write=False)
        return cls(n=n, a=a, a_inv=a_inv,
                   lambda_min=float(eigs[0]), lambda_max=float(eigs[-1]))

    @classmethod
    def identity(cls, n: int) -> "SpdForm":
        return cls.from_matrix(np.eye(n))

    def _check(self, v, name: str) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim == 0:
            v = v[None]
        if v.shape[-1] != self.n:
            raise ValueError(f"{name} has length {v.shape[-1]}, expected {self.n}")
        return v

    def hamiltonian(self, p):
        """H(p) = 1/2 Ap.p, vectorized over leading axes of ``p``."""
        p = self._check(p, "p")
        out = 0.5 * np.einsum("...i,ij,...j->...", p, self.a, p)
        return float(out) if out.ndim == 0 else out

    def lagrangian(self, q):
        """L(q) = 1/2 A^{-1}q.q, vectorized over leading axes of ``q``."""
        q = self._check(q, "q")
        out = 0.5 * np.einsum("...i,ij,...j->...", q, self.a_inv, q)
        return float(out) if out.ndim == 0 else out

    def grad_hamiltonian(self, p):
        """grad H(p) = Ap."""
        return self._check(p, "p") @ self.a

    def grad_lagrangian(self, q):
        """grad L(q) = A^{-1}q."""
        return self._check(q, "q") @ self.a_inv


def hamiltonian(form: SpdForm, p):
    return form.hamiltonian(p)


def lagrangian(form: SpdForm, q):
    return form.lagrangian(q)


def grad_hamiltonian(form: SpdForm, p):
    return form.grad_hamiltonian(p)


def grad_lagrangian(form: SpdForm, q):
    return form.grad_lagrangian(q)
