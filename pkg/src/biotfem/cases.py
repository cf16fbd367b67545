"""Manufactured solutions for the Biot system on the unit square.

All callables take ``(t, x, y)`` with array-valued ``x, y``.  Vector fields
return shape ``(2, ...)``; displacement gradients return ``(2, 2, ...)``
with ``grad_u[i, j] = d_j u_i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .assemble import DirichletData, MaterialParameters
from .space import FULL_DIRICHLET, TANGENTIAL_DIRICHLET, BcSpec

PI = np.pi


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    exact_u: Callable
    exact_p: Callable
    exact_grad_u: Callable
    exact_grad_p: Callable
    exact_u_t: Callable
    exact_p_t: Callable
    data_f: Callable
    data_fdot: Callable
    data_g: Callable
    bc: BcSpec
    params: MaterialParameters
    dirichlet: DirichletData | None = None


# -- sine test ------------------------------------------------------------

_PSI_SCALE = 1.0 / (64 * PI**4 + 4 * PI**2)


def psi(t):
    t = np.asarray(t, dtype=float)
    return _PSI_SCALE * (
        8 * PI**2 * np.sin(2 * PI * t) - 2 * PI * np.cos(2 * PI * t)
        + 2 * PI * np.exp(-8 * PI**2 * t)
    )


def psi_prime(t):
    t = np.asarray(t, dtype=float)
    return _PSI_SCALE * (
        16 * PI**3 * np.cos(2 * PI * t) + 4 * PI**2 * np.sin(2 * PI * t)
        - 16 * PI**3 * np.exp(-8 * PI**2 * t)
    )


def _phi(x, y):
    return np.sin(2 * PI * x) * np.sin(2 * PI * y)


def _grad_phi(x, y):
    sx, cx = np.sin(2 * PI * x), np.cos(2 * PI * x)
    sy, cy = np.sin(2 * PI * y), np.cos(2 * PI * y)
    return 2 * PI * np.stack([cx * sy, sx * cy])


def _hess_phi(x, y):
    sx, cx = np.sin(2 * PI * x), np.cos(2 * PI * x)
    sy, cy = np.sin(2 * PI * y), np.cos(2 * PI * y)
    xy = 4 * PI**2 * cx * cy
    d = -4 * PI**2 * sx * sy
    return np.stack([np.stack([d, xy]), np.stack([xy, d])])


def biot_sine_case(params: MaterialParameters | None = None) -> ManufacturedCase:
    """``p = psi(t) phi``, ``u = psi(t) grad(phi) / (8 pi^2)``, ``phi = sin(2 pi x) sin(2 pi y)``.

    Since ``lap(phi) = -8 pi^2 phi`` the sources are
    ``f = (2 mu + lam + alpha) psi grad(phi)`` and
    ``g = (8 pi^2 kappa psi - alpha psi') phi``.  The tangential displacement
    and the pressure vanish on the boundary, and so does the normal traction
    ``2 mu d_n(u.n) + lam div(u) - alpha p``, hence no boundary terms.
    """
    mat = params or MaterialParameters(1.0, 1.0, 1.0, 1.0)
    c = 1.0 / (8 * PI**2)
    lame = 2 * mat.mu + mat.lam + mat.alpha

    return ManufacturedCase(
        name="biot_sine",
        exact_u=lambda t, x, y: c * psi(t) * _grad_phi(x, y),
        exact_p=lambda t, x, y: psi(t) * _phi(x, y),
        exact_grad_u=lambda t, x, y: c * psi(t) * _hess_phi(x, y),
        exact_grad_p=lambda t, x, y: psi(t) * _grad_phi(x, y),
        exact_u_t=lambda t, x, y: c * psi_prime(t) * _grad_phi(x, y),
        exact_p_t=lambda t, x, y: psi_prime(t) * _phi(x, y),
        data_f=lambda t, x, y: lame * psi(t) * _grad_phi(x, y),
        data_fdot=lambda t, x, y: lame * psi_prime(t) * _grad_phi(x, y),
        data_g=lambda t, x, y: (8 * PI**2 * mat.kappa * psi(t)
                                - mat.alpha * psi_prime(t)) * _phi(x, y),
        bc=BcSpec(displacement_mode=TANGENTIAL_DIRICHLET),
        params=mat,
        dirichlet=None,
    )


# -- polynomial cases -----------------------------------------------------


def _d(c, axis):
    """Derivative of a 2D power-series coefficient array, shape preserved."""
    out = np.zeros_like(c)
    d = npoly.polyder(c, axis=axis)
    if axis == 0:
        out[: d.shape[0]] = d
    else:
        out[:, : d.shape[1]] = d
    return out


def _mono(shape, *terms):
    c = np.zeros(shape)
    for coef, i, j in terms:
        c[i, j] += coef
    return c


class _PolyField:
    """Field ``c0 + t c1`` with one coefficient array per component."""

    def __init__(self, c0, c1):
        self.c0 = np.asarray(c0, dtype=float)
        self.c1 = np.asarray(c1, dtype=float)

    @staticmethod
    def _eval(c, x, y):
        lead = c.shape[:-2]
        flat = c.reshape((-1,) + c.shape[-2:])
        vals = np.stack([npoly.polyval2d(x, y, ci) + 0.0 * x for ci in flat])
        return vals.reshape(lead + vals.shape[1:]) if lead else vals[0]

    def value(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self._eval(self.c0, x, y) + np.asarray(t, dtype=float) * self._eval(self.c1, x, y)

    def rate(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self._eval(self.c1, x, y) + 0.0 * np.asarray(t, dtype=float)

    def map(self, fn):
        """Apply a linear coefficient map to both time coefficients."""
        return _PolyField(fn(self.c0), fn(self.c1))


def polynomial_case(k: int, time_constant: bool = False,
                    params: MaterialParameters | None = None) -> ManufacturedCase:
    """Fields in the Taylor-Hood spaces of degree ``(k + 1, k)``, affine in time.

    Uses full Dirichlet conditions with non-zero boundary data, so the
    discrete solution reproduces the exact one up to solver round-off.
    """
    if not 1 <= k <= 3:
        raise ValueError(f"k must be in 1..3, got {k}")
    mat = params or MaterialParameters(mu=0.8, lam=1.3, kappa=0.6, alpha=0.9)
    m = k + 1
    sh = (m + 1, m + 1)
    s1 = 0.0 if time_constant else 1.0
    ux0 = _mono(sh, (1.0, m, 0), (0.5, 1, 1), (0.3, 0, 0))
    ux1 = _mono(sh, (0.4 * s1, 0, m), (-1.0 * s1, 1, 0))
    uy0 = _mono(sh, (1.0, 0, m), (-0.7, m - 1, 1), (0.2, 0, 0))
    uy1 = _mono(sh, (0.6 * s1, m, 0), (0.25 * s1, 0, 1))
    p0 = _mono(sh, (1.0, k, 0), (0.5, 0, k), (1.0, 1, k - 1), (1.0, 0, 0))
    p1 = _mono(sh, (0.3 * s1, 0, k), (-0.8 * s1, k, 0), (0.5 * s1, 0, 0))

    u = _PolyField(np.stack([ux0, uy0]), np.stack([ux1, uy1]))
    p = _PolyField(p0, p1)

    def grad_u(c):  # (2, n, n) -> (2, 2, n, n)
        return np.stack([np.stack([_d(ci, 0), _d(ci, 1)]) for ci in c])

    def grad_p(c):
        return np.stack([_d(c, 0), _d(c, 1)])

    def force(cu, cp):
        gu = grad_u(cu)
        div = gu[0, 0] + gu[1, 1]
        sig = mat.mu * (gu + gu.transpose(1, 0, 2, 3))
        sig[0, 0] += mat.lam * div
        sig[1, 1] += mat.lam * div
        div_sig = np.stack([_d(sig[i, 0], 0) + _d(sig[i, 1], 1) for i in range(2)])
        return -div_sig + mat.alpha * grad_p(cp)

    f = _PolyField(force(u.c0, p.c0), force(u.c1, p.c1))
    div_ut = _d(u.c1[0], 0) + _d(u.c1[1], 1)

    def g_coef(cp, with_div):
        lap = _d(_d(cp, 0), 0) + _d(_d(cp, 1), 1)
        return (mat.alpha * div_ut if with_div else 0.0) - mat.kappa * lap

    g = _PolyField(g_coef(p.c0, True), g_coef(p.c1, False))
    gu = u.map(grad_u)
    gp = p.map(grad_p)

    return ManufacturedCase(
        name="polynomial",
        exact_u=u.value,
        exact_p=p.value,
        exact_grad_u=gu.value,
        exact_grad_p=gp.value,
        exact_u_t=u.rate,
        exact_p_t=p.rate,
        data_f=f.value,
        data_fdot=f.rate,
        data_g=g.value,
        bc=BcSpec(displacement_mode=FULL_DIRICHLET),
        params=mat,
        dirichlet=DirichletData(u.value, u.rate, p.value, p.rate),
    )


def get_case(name: str, k: int = 1) -> ManufacturedCase:
    if name == "biot_sine":
        return biot_sine_case()
    if name == "polynomial":
        return polynomial_case(k)
    raise ValueError(f"unknown case {name!r}")


# -- finite-difference residual oracle -------------------------------------

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_OFF = np.arange(-2, 3)


def _fd(fun, h):
    """Fourth-order central difference of ``fun(delta)`` at ``delta = 0``."""
    return sum(w * fun(o * h) for w, o in zip(_D1, _OFF) if w != 0.0) / h


def pde_residual(case: ManufacturedCase, t, x, y, h: float = 1e-3, ht: float = 1e-4):
    """Residuals of both Biot equations from differences of the exact fields.

    Returns ``(r_momentum, r_mass)`` with shapes ``(2, ...)`` and ``(...)``.
    Independent of the closed-form gradients stored on the case.
    """
    mat = case.params
    U, P = case.exact_u, case.exact_p

    def du(tt, xx, yy, axis):
        if axis == 0:
            return _fd(lambda e: U(tt, xx + e, yy), h)
        return _fd(lambda e: U(tt, xx, yy + e), h)

    def sigma(tt, xx, yy):
        gx, gy = du(tt, xx, yy, 0), du(tt, xx, yy, 1)  # d_x u, d_y u (each (2, ...))
        div = gx[0] + gy[1]
        sxx = 2 * mat.mu * gx[0] + mat.lam * div
        syy = 2 * mat.mu * gy[1] + mat.lam * div
        sxy = mat.mu * (gy[0] + gx[1])
        return sxx, sxy, syy

    dsx = _fd(lambda e: np.stack(sigma(t, x + e, y)), h)
    dsy = _fd(lambda e: np.stack(sigma(t, x, y + e)), h)
    div_sigma = np.stack([dsx[0] + dsy[1], dsx[1] + dsy[2]])
    grad_p = np.stack([_fd(lambda e: P(t, x + e, y), h), _fd(lambda e: P(t, x, y + e), h)])
    r1 = -div_sigma + mat.alpha * grad_p - case.data_f(t, x, y)

    def div_u(tt):
        return du(tt, x, y, 0)[0] + du(tt, x, y, 1)[1]

    div_ut = _fd(lambda e: div_u(t + e), ht)
    lap_p = (
        _fd(lambda e: _fd(lambda d: P(t, x + e + d, y), h), h)
        + _fd(lambda e: _fd(lambda d: P(t, x, y + e + d), h), h)
    )
    r2 = mat.alpha * div_ut - mat.kappa * lap_p - case.data_g(t, x, y)
    return r1, r2
