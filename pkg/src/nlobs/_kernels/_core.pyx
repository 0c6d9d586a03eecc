# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled kernels: cyclic-Jacobi eigenvalues and fixed-step integration.

This file mirrors ``_pure.py`` operation-for-operation (same formulas, same
evaluation order) so both backends produce bit-identical doubles. The build
uses -ffp-contract=off to keep it that way. Edit the two files together.
"""

from libc.math cimport fabs, isfinite, sqrt

import numpy as np

cdef int MAX_JACOBI_SWEEPS = 60
cdef int LINE_SEARCH_HALVINGS = 30


def jacobi_eigvals(const double[:, ::1] a):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, p, q
    m_arr = np.empty((n, n))
    cdef double[:, ::1] m = m_arr
    for i in range(n):
        for j in range(n):
            m[i, j] = a[i, j]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    if n == 1:
        out[0] = m[0, 0]
        return out_arr

    cdef double off, dia, apq, theta, t, c, s, app, aqq, aip, aiq
    cdef int sweep
    cdef bint converged = False
    for sweep in range(MAX_JACOBI_SWEEPS):
        off = 0.0
        dia = 0.0
        for i in range(n):
            dia += m[i, i] * m[i, i]
            for j in range(i + 1, n):
                off += 2.0 * m[i, j] * m[i, j]
        if sqrt(off) <= 1e-14 * sqrt(dia):
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if apq == 0.0:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * apq)
                if theta > 1e150:
                    t = 0.5 / theta
                elif theta < -1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                app = m[p, p]
                aqq = m[q, q]
                m[p, p] = app - t * apq
                m[q, q] = aqq + t * apq
                m[p, q] = 0.0
                m[q, p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        aip = m[i, p]
                        aiq = m[i, q]
                        m[i, p] = c * aip - s * aiq
                        m[p, i] = m[i, p]
                        m[i, q] = s * aip + c * aiq
                        m[q, i] = m[i, q]
    if not converged:
        raise ArithmeticError("jacobi_stalled")
    for i in range(n):
        out[i] = m[i, i]
    return out_arr


cdef void _field(const double[:, ::1] a, const long long[::1] outs, const double[::1] coefs,
                 const long long[:, ::1] exps, double[::1] x, double[::1] fx,
                 Py_ssize_t n, Py_ssize_t nterms) noexcept:
    cdef Py_ssize_t i, j, t
    cdef long long k
    cdef double acc, v
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += a[i, j] * x[j]
        fx[i] = acc
    for t in range(nterms):
        v = coefs[t]
        for j in range(n):
            k = exps[t, j]
            while k > 0:
                v *= x[j]
                k -= 1
        fx[outs[t]] += v


cdef void _field_jacobian(const double[:, ::1] a, const long long[::1] outs, const double[::1] coefs,
                          const long long[:, ::1] exps, double[::1] x, double[:, ::1] jac,
                          Py_ssize_t n, Py_ssize_t nterms) noexcept:
    cdef Py_ssize_t i, j, t
    cdef long long ej, k
    cdef double v
    for i in range(n):
        for j in range(n):
            jac[i, j] = a[i, j]
    for t in range(nterms):
        for j in range(n):
            ej = exps[t, j]
            if ej == 0:
                continue
            v = coefs[t] * <double> ej
            for i in range(n):
                k = exps[t, i]
                if i == j:
                    k -= 1
                while k > 0:
                    v *= x[i]
                    k -= 1
            jac[outs[t], j] += v


cdef bint _solve_inplace(double[:, ::1] mat, double[::1] rhs, Py_ssize_t n) noexcept:
    cdef Py_ssize_t col, r, c2, piv
    cdef double best, v, factor, acc, tmp
    for col in range(n):
        piv = col
        best = fabs(mat[col, col])
        for r in range(col + 1, n):
            v = fabs(mat[r, col])
            if v > best:
                best = v
                piv = r
        if best == 0.0:
            return False
        if piv != col:
            for c2 in range(n):
                tmp = mat[col, c2]
                mat[col, c2] = mat[piv, c2]
                mat[piv, c2] = tmp
            tmp = rhs[col]
            rhs[col] = rhs[piv]
            rhs[piv] = tmp
        for r in range(col + 1, n):
            factor = mat[r, col] / mat[col, col]
            if factor != 0.0:
                mat[r, col] = 0.0
                for c2 in range(col + 1, n):
                    mat[r, c2] -= factor * mat[col, c2]
                rhs[r] -= factor * rhs[col]
    for col in range(n - 1, -1, -1):
        acc = rhs[col]
        for c2 in range(col + 1, n):
            acc -= mat[col, c2] * rhs[c2]
        rhs[col] = acc / mat[col, col]
    return True


cdef double _norm2(double[::1] v, Py_ssize_t n) noexcept:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += v[i] * v[i]
    return sqrt(acc)


def integrate_linpoly(const double[:, ::1] amat, const long long[::1] outs, const double[::1] coefs,
                      const long long[:, ::1] exps, const double[::1] x0, const double[::1] hs,
                      int method, double newton_tol, int newton_max_iter):
    """Fixed-step integration of dx/dt = A x + Phi(x); see the pure twin."""
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t nterms = outs.shape[0]
    cdef Py_ssize_t nsteps = hs.shape[0]
    cdef Py_ssize_t i, j, step
    cdef int it, half
    cdef double h, scale, gn, damp
    cdef bint converged, improved

    states_arr = np.empty((nsteps + 1, n))
    cdef double[:, ::1] states = states_arr

    x_arr = np.empty(n)
    cdef double[::1] x = x_arr
    for i in range(n):
        x[i] = x0[i]
        states[0, i] = x[i]

    k1_arr = np.empty(n)
    k2_arr = np.empty(n)
    k3_arr = np.empty(n)
    k4_arr = np.empty(n)
    xt_arr = np.empty(n)
    g_arr = np.empty(n)
    d_arr = np.empty(n)
    z_arr = np.empty(n)
    jac_arr = np.empty((n, n))
    cdef double[::1] k1 = k1_arr
    cdef double[::1] k2 = k2_arr
    cdef double[::1] k3 = k3_arr
    cdef double[::1] k4 = k4_arr
    cdef double[::1] xt = xt_arr
    cdef double[::1] g = g_arr
    cdef double[::1] d = d_arr
    cdef double[::1] z = z_arr
    cdef double[:, ::1] jac = jac_arr

    for step in range(nsteps):
        h = hs[step]
        if method == 0:
            _field(amat, outs, coefs, exps, x, k1, n, nterms)
            for i in range(n):
                xt[i] = x[i] + 0.5 * h * k1[i]
            _field(amat, outs, coefs, exps, xt, k2, n, nterms)
            for i in range(n):
                xt[i] = x[i] + 0.5 * h * k2[i]
            _field(amat, outs, coefs, exps, xt, k3, n, nterms)
            for i in range(n):
                xt[i] = x[i] + h * k3[i]
            _field(amat, outs, coefs, exps, xt, k4, n, nterms)
            for i in range(n):
                x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        else:
            scale = 1.0 + _norm2(x, n)
            for i in range(n):
                z[i] = x[i]
            converged = False
            for it in range(newton_max_iter):
                _field(amat, outs, coefs, exps, z, k1, n, nterms)
                for i in range(n):
                    g[i] = z[i] - x[i] - h * k1[i]
                gn = _norm2(g, n)
                if gn <= newton_tol * scale:
                    converged = True
                    break
                _field_jacobian(amat, outs, coefs, exps, z, jac, n, nterms)
                for i in range(n):
                    for j in range(n):
                        jac[i, j] = -h * jac[i, j]
                    jac[i, i] += 1.0
                    d[i] = g[i]
                if not _solve_inplace(jac, d, n):
                    raise ArithmeticError(f"newton_divergence:{step}")
                damp = 1.0
                improved = False
                for half in range(LINE_SEARCH_HALVINGS):
                    for i in range(n):
                        xt[i] = z[i] - damp * d[i]
                    _field(amat, outs, coefs, exps, xt, k2, n, nterms)
                    for i in range(n):
                        g[i] = xt[i] - x[i] - h * k2[i]
                    if _norm2(g, n) < gn:
                        for i in range(n):
                            z[i] = xt[i]
                        improved = True
                        break
                    damp *= 0.5
                if not improved:
                    raise ArithmeticError(f"newton_divergence:{step}")
            if not converged:
                raise ArithmeticError(f"newton_divergence:{step}")
            for i in range(n):
                x[i] = z[i]
        for i in range(n):
            if not isfinite(x[i]):
                raise ArithmeticError(f"nonfinite_state:{step}")
            states[step + 1, i] = x[i]
    return states_arr
