"""Pure numpy element kernels; reference for the compiled ``_kernels`` module.

All kernels take quadrature data for affine elements:

``G``   physical basis gradients, shape (ne, nq, nb, 2)
``phi`` reference basis values, shape (nq, nb)
``w``   quadrature weights times ``|det J|``, shape (ne, nq)

Local matrices are returned exactly symmetric where the form is symmetric.
Vector-valued local matrices are blocked: x-component basis first.
"""
import numpy as np


def _mirror_upper(L):
    iu = np.triu_indices(L.shape[1], 1)
    L[:, iu[1], iu[0]] = L[:, iu[0], iu[1]]
    return L


def elasticity_local(G, w, mu, lam):
    """``2 mu eps(u):eps(v) + lam div(u) div(v)`` for vector Lagrange elements."""
    ne, nq, nb, _ = G.shape
    Gw = G * w[:, :, None, None]
    dot = np.einsum("eqid,eqjd->eij", Gw, G)
    # cross[e, a, i, b, j] = sum_q w d_a phi_i d_b phi_j
    cross = np.einsum("eqia,eqjb->eaibj", Gw, G)
    L = np.empty((ne, 2, nb, 2, nb))
    for b in range(2):
        for a in range(2):
            # row (b, i), column (a, j)
            blk = mu * cross[:, a, :, b, :] + lam * cross[:, b, :, a, :]
            if a == b:
                blk = blk + mu * dot
            L[:, b, :, a, :] = blk
    return _mirror_upper(L.reshape(ne, 2 * nb, 2 * nb))


def coupling_local(phi_p, G_u, w, alpha):
    """``alpha q div(v)``; rows pressure basis, columns vector displacement basis."""
    ne, nq, nb, _ = G_u.shape
    L = np.einsum("eq,qi,eqja->eiaj", w, phi_p, G_u)
    return alpha * L.reshape(ne, phi_p.shape[1], 2 * nb)


def laplace_local(G, w, kappa):
    """``kappa grad(p) . grad(q)``."""
    Gw = G * w[:, :, None, None]
    return _mirror_upper(kappa * np.einsum("eqid,eqjd->eij", Gw, G))


def mass_local(phi, w):
    """``p q``."""
    return _mirror_upper(np.einsum("eq,qi,qj->eij", w, phi, phi))


def load_local(values, phi, w):
    """``sum_q w f(x_q) phi_i(x_q)``; ``values`` has shape (ne, nq)."""
    return (values * w) @ phi


def values_at_quad(coef, phi):
    """FE function values at quadrature points; ``coef`` has shape (ne, nb)."""
    return coef @ phi.T


def gradients_at_quad(coef, G):
    """FE function gradients, shape (ne, nq, 2)."""
    return np.einsum("eb,eqbd->eqd", coef, G)
