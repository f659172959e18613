"""Monomial and divergence-free polynomial bases on patch-local coordinates.

Spatial coordinates are ``(xi, eta)`` and time is ``tau``.  The
divergence-free vector basis of degree ``k`` consists of the curls
``(d/deta psi, -d/dxi psi)`` of the scalar monomials ``psi`` of degree
``1..k+1``; in two dimensions these span exactly the divergence-free subspace
of ``[P^k]^2``, which has dimension ``(k+1)(k+4)/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import UnsupportedDegree, UnsupportedDerivative

MAX_DEGREE = 6


def _falling(n: NDArray, d: int) -> NDArray:
    """n (n-1) ... (n-d+1), zero when d > n."""
    out = np.ones_like(n, dtype=float)
    for j in range(d):
        out = out * (n - j)
    return out


def _mono(x: NDArray, exps: NDArray, d: int) -> NDArray:
    """d-th derivative of x**e for every exponent, shape (npts, nexp)."""
    x = np.asarray(x, dtype=float)[..., None]
    coef = _falling(exps, d)
    pw = np.clip(exps - d, 0, None)
    return coef * x**pw


def _check_degree(k: int) -> None:
    if not (0 <= k <= MAX_DEGREE):
        raise UnsupportedDegree(f"degree {k} outside 0..{MAX_DEGREE}")


@dataclass(frozen=True)
class ScalarBasis:
    """Monomials ``xi**a * eta**b`` with ``a + b <= k``."""

    degree: int
    terms: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.terms)

    def eval(self, xi: ArrayLike, eta: ArrayLike, dxi: int = 0, deta: int = 0) -> NDArray:
        """Values (or partial derivatives) at points, shape ``(npts, size)``."""
        e = np.asarray(self.terms)
        return _mono(xi, e[:, 0], dxi) * _mono(eta, e[:, 1], deta)


@dataclass(frozen=True)
class DivFreeBasis:
    """Curls of stream-function monomials; members are 2-vectors."""

    degree: int
    streams: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.streams)

    def eval(self, xi: ArrayLike, eta: ArrayLike, dxi: int = 0, deta: int = 0) -> NDArray:
        """Member values, shape ``(npts, size, 2)``."""
        e = np.asarray(self.streams)
        a, b = e[:, 0], e[:, 1]
        # psi = xi^a eta^b; member = (d_eta psi, -d_xi psi)
        vx = _mono(xi, a, dxi) * _mono(eta, b, deta + 1)
        vy = -_mono(xi, a, dxi + 1) * _mono(eta, b, deta)
        return np.stack([vx, vy], axis=-1)

    def divergence(self, xi: ArrayLike, eta: ArrayLike) -> NDArray:
        return self.eval(xi, eta, dxi=1)[..., 0] + self.eval(xi, eta, deta=1)[..., 1]


def scalar_basis(k: int) -> ScalarBasis:
    _check_degree(k)
    terms = tuple((d - b, b) for d in range(k + 1) for b in range(d + 1))
    return ScalarBasis(k, terms)


def divfree_basis(k: int) -> DivFreeBasis:
    _check_degree(k)
    streams = tuple((d - b, b) for d in range(1, k + 2) for b in range(d + 1))
    return DivFreeBasis(k, streams)


@dataclass(frozen=True)
class SpaceTimeBasis:
    """Tensor product of a spatial basis with monomials ``tau**m``, ``m <= k``.

    Member ``s * (k + 1) + m`` is spatial member ``s`` times ``tau**m``.
    """

    spatial: ScalarBasis | DivFreeBasis
    time_degree: int

    @property
    def is_vector(self) -> bool:
        return isinstance(self.spatial, DivFreeBasis)

    @property
    def size(self) -> int:
        return self.spatial.size * (self.time_degree + 1)

    def time_eval(self, tau: ArrayLike, dtau: int = 0) -> NDArray:
        return _mono(tau, np.arange(self.time_degree + 1), dtau)

    def eval(
        self,
        xi: ArrayLike,
        eta: ArrayLike,
        tau: ArrayLike,
        dxi: int = 0,
        deta: int = 0,
        dtau: int = 0,
    ) -> NDArray:
        """Pointwise values; ``(npts, size)`` or ``(npts, size, 2)``."""
        S = self.spatial.eval(xi, eta, dxi, deta)
        T = self.time_eval(tau, dtau)
        if self.is_vector:
            out = S[:, :, None, :] * T[:, None, :, None]
            return out.reshape(S.shape[0], self.size, 2)
        out = S[:, :, None] * T[:, None, :]
        return out.reshape(S.shape[0], self.size)

    def eval_grid(self, S: NDArray, T: NDArray) -> NDArray:
        """Tensor evaluation on a spatial point set times a time point set.

        ``S`` is a spatial evaluation ``(ns, nsp[, 2])`` and ``T`` a temporal one
        ``(nt, k+1)``; the result is ``(ns, nt, size[, 2])``.
        """
        if self.is_vector:
            out = S[:, None, :, None, :] * T[None, :, None, :, None]
            return out.reshape(S.shape[0], T.shape[0], self.size, 2)
        out = S[:, None, :, None] * T[None, :, None, :]
        return out.reshape(S.shape[0], T.shape[0], self.size)


def spacetime_tensor(spatial: ScalarBasis | DivFreeBasis, temporal: ScalarBasis | int) -> SpaceTimeBasis:
    k = temporal if isinstance(temporal, int) else temporal.degree
    _check_degree(k)
    return SpaceTimeBasis(spatial, k)


def eval_with_derivs(basis, point: ArrayLike, want: tuple[int, int, int] = (0, 0, 0)) -> NDArray:
    """Evaluate every member of ``basis`` at one point.

    ``want`` holds derivative orders ``(d_xi, d_eta, d_tau)``.  Spatial orders
    are limited to one and temporal orders to three.
    """
    dxi, deta, dtau = want
    if dxi < 0 or deta < 0 or dtau < 0 or dxi + deta > 1 or dtau > 3:
        raise UnsupportedDerivative(f"derivative {want} not supported")
    pt = np.asarray(point, dtype=float).reshape(-1)
    xi, eta = pt[:1], pt[1:2]
    if isinstance(basis, SpaceTimeBasis):
        tau = pt[2:3] if pt.size > 2 else np.zeros(1)
        return basis.eval(xi, eta, tau, dxi, deta, dtau)[0]
    if dtau:
        return np.zeros((basis.size, 2) if isinstance(basis, DivFreeBasis) else basis.size)
    return basis.eval(xi, eta, dxi, deta)[0]


def tau_derivative_factor(d: int) -> float:
    """``d!``: the ``d``-th derivative of ``tau**d`` (all other powers vanish at 0)."""
    return float(factorial(d))
