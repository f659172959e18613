"""Jump data generated by a known correction polynomial on one patch."""

import numpy as np


class PolyData:
    """``jump`` is the polynomial itself and ``source_jump`` its PDE image.

    With these data the functional has an exact zero at ``coeffs``.
    """

    def __init__(self, patch, coeffs, t_n=0.0):
        self.patch = patch
        self.ref = patch.ref
        self.c = np.asarray(coeffs, dtype=float)
        self.t_n = t_n

    def _local(self, x, y, t):
        x, y, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(t, float))
        shape = x.shape
        xi, eta, tau = self.ref.local(self.patch.center, x.ravel(), y.ravel(), t.ravel(), self.t_n)
        return shape, xi, eta, tau

    def _comp(self, xi, eta, tau, dxi=0, deta=0, dtau=0):
        nh = self.ref.n_h
        VH = self.ref.basis_h.eval(xi, eta, tau, dxi, deta, dtau)
        VE = self.ref.basis_e.eval(xi, eta, tau, dxi, deta, dtau)
        l, T = self.ref.length, self.ref.dt_gamma
        s = l ** -(dxi + deta) * T ** -dtau
        ch, ce = self.c[:nh], self.c[nh:]
        return s * (VH[..., 0] @ ch), s * (VH[..., 1] @ ch), s * (VE @ ce)

    def jump(self, x, y, t):
        shape, xi, eta, tau = self._local(x, y, t)
        return tuple(v.reshape(shape) for v in self._comp(xi, eta, tau))

    def source_jump(self, x, y, t):
        shape, xi, eta, tau = self._local(x, y, t)
        ph = self.ref.physics
        hx, hy, ez = self._comp(xi, eta, tau)
        hx_t, hy_t, ez_t = self._comp(xi, eta, tau, dtau=1)
        hx_x, hy_x, ez_x = self._comp(xi, eta, tau, dxi=1)
        hx_y, hy_y, ez_y = self._comp(xi, eta, tau, deta=1)
        f1x = ph.mu * hx_t + ez_y
        f1y = ph.mu * hy_t - ez_x
        f2 = ph.eps * ez_t - hy_x + hx_y + ph.sigma * ez
        return tuple(v.reshape(shape) for v in (f1x, f1y, f2))


class ConstantData:
    """Constant jumps and zero sources."""

    def __init__(self, jx=0.0, jy=0.0, je=0.0):
        self.v = (jx, jy, je)

    def jump(self, x, y, t):
        shape = np.broadcast(np.asarray(x), np.asarray(y), np.asarray(t)).shape
        return tuple(np.full(shape, v) for v in self.v)

    def source_jump(self, x, y, t):
        shape = np.broadcast(np.asarray(x), np.asarray(y), np.asarray(t)).shape
        return tuple(np.zeros(shape) for _ in range(3))
