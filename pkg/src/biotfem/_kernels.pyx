# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels.  Same signatures and results as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def elasticity_local(const double[:, :, :, ::1] G, const double[:, ::1] w,
                     double mu, double lam):
    cdef Py_ssize_t ne = G.shape[0], nq = G.shape[1], nb = G.shape[2]
    cdef Py_ssize_t n = 2 * nb
    out = np.empty((ne, n, n))
    cdef double[:, :, ::1] L = out
    cdef Py_ssize_t e, q, r, c, i, j, a, b
    cdef double acc, wq, gia, gib, gja, gjb
    for e in range(ne):
        for r in range(n):
            b = r // nb
            i = r - b * nb
            for c in range(r, n):
                a = c // nb
                j = c - a * nb
                acc = 0.0
                for q in range(nq):
                    wq = w[e, q]
                    gia = G[e, q, i, a]
                    gib = G[e, q, i, b]
                    gja = G[e, q, j, a]
                    gjb = G[e, q, j, b]
                    acc += wq * (mu * gia * gjb + lam * gib * gja)
                    if a == b:
                        acc += wq * mu * (G[e, q, i, 0] * G[e, q, j, 0]
                                          + G[e, q, i, 1] * G[e, q, j, 1])
                L[e, r, c] = acc
                L[e, c, r] = acc
    return out


def coupling_local(const double[:, ::1] phi_p, const double[:, :, :, ::1] G_u,
                   const double[:, ::1] w, double alpha):
    cdef Py_ssize_t ne = G_u.shape[0], nq = G_u.shape[1], nb = G_u.shape[2]
    cdef Py_ssize_t npb = phi_p.shape[1]
    out = np.empty((ne, npb, 2 * nb))
    cdef double[:, :, ::1] L = out
    cdef Py_ssize_t e, q, i, j, a
    cdef double acc
    for e in range(ne):
        for i in range(npb):
            for a in range(2):
                for j in range(nb):
                    acc = 0.0
                    for q in range(nq):
                        acc += w[e, q] * phi_p[q, i] * G_u[e, q, j, a]
                    L[e, i, a * nb + j] = alpha * acc
    return out


def laplace_local(const double[:, :, :, ::1] G, const double[:, ::1] w, double kappa):
    cdef Py_ssize_t ne = G.shape[0], nq = G.shape[1], nb = G.shape[2]
    out = np.empty((ne, nb, nb))
    cdef double[:, :, ::1] L = out
    cdef Py_ssize_t e, q, i, j
    cdef double acc
    for e in range(ne):
        for i in range(nb):
            for j in range(i, nb):
                acc = 0.0
                for q in range(nq):
                    acc += w[e, q] * (G[e, q, i, 0] * G[e, q, j, 0]
                                      + G[e, q, i, 1] * G[e, q, j, 1])
                L[e, i, j] = kappa * acc
                L[e, j, i] = kappa * acc
    return out


def mass_local(const double[:, ::1] phi, const double[:, ::1] w):
    cdef Py_ssize_t ne = w.shape[0], nq = w.shape[1], nb = phi.shape[1]
    out = np.empty((ne, nb, nb))
    cdef double[:, :, ::1] L = out
    cdef Py_ssize_t e, q, i, j
    cdef double acc
    for e in range(ne):
        for i in range(nb):
            for j in range(i, nb):
                acc = 0.0
                for q in range(nq):
                    acc += w[e, q] * phi[q, i] * phi[q, j]
                L[e, i, j] = acc
                L[e, j, i] = acc
    return out


def load_local(const double[:, ::1] values, const double[:, ::1] phi,
               const double[:, ::1] w):
    cdef Py_ssize_t ne = w.shape[0], nq = w.shape[1], nb = phi.shape[1]
    out = np.zeros((ne, nb))
    cdef double[:, ::1] L = out
    cdef Py_ssize_t e, q, i
    cdef double v
    for e in range(ne):
        for q in range(nq):
            v = values[e, q] * w[e, q]
            for i in range(nb):
                L[e, i] += v * phi[q, i]
    return out


def values_at_quad(const double[:, ::1] coef, const double[:, ::1] phi):
    cdef Py_ssize_t ne = coef.shape[0], nb = coef.shape[1], nq = phi.shape[0]
    out = np.empty((ne, nq))
    cdef double[:, ::1] V = out
    cdef Py_ssize_t e, q, i
    cdef double acc
    for e in range(ne):
        for q in range(nq):
            acc = 0.0
            for i in range(nb):
                acc += coef[e, i] * phi[q, i]
            V[e, q] = acc
    return out


def gradients_at_quad(const double[:, ::1] coef, const double[:, :, :, ::1] G):
    cdef Py_ssize_t ne = G.shape[0], nq = G.shape[1], nb = G.shape[2]
    out = np.empty((ne, nq, 2))
    cdef double[:, :, ::1] D = out
    cdef Py_ssize_t e, q, i
    cdef double gx, gy
    for e in range(ne):
        for q in range(nq):
            gx = 0.0
            gy = 0.0
            for i in range(nb):
                gx += coef[e, i] * G[e, q, i, 0]
                gy += coef[e, i] * G[e, q, i, 1]
            D[e, q, 0] = gx
            D[e, q, 1] = gy
    return out
