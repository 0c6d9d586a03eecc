"""Pure-Python twin of the compiled kernels.

Every arithmetic operation here is mirrored, in the same order, by
``_core.pyx``; both run on IEEE doubles, so the two backends produce
bit-identical results. Keep the two files in lockstep when editing.

Kernels raise ``ArithmeticError`` with structured messages
("nonfinite_state:<step>", "newton_divergence:<step>", "jacobi_stalled");
callers translate these into package exceptions.
"""

import math

import numpy as np

MAX_JACOBI_SWEEPS = 60
LINE_SEARCH_HALVINGS = 30


def jacobi_eigvals(a):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Returns the eigenvalues unsorted (in final diagonal order). Convergence:
    off-diagonal Frobenius mass <= 1e-14 x diagonal Frobenius mass.
    """
    n = a.shape[0]
    m = [[float(a[i, j]) for j in range(n)] for i in range(n)]
    if n == 1:
        return np.array([m[0][0]])
    for _sweep in range(MAX_JACOBI_SWEEPS):
        off = 0.0
        dia = 0.0
        for i in range(n):
            dia += m[i][i] * m[i][i]
            for j in range(i + 1, n):
                off += 2.0 * m[i][j] * m[i][j]
        if math.sqrt(off) <= 1e-14 * math.sqrt(dia):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p][q]
                if apq == 0.0:
                    continue
                theta = (m[q][q] - m[p][p]) / (2.0 * apq)
                # guard against theta**2 overflow; limit form t ~ 1/(2 theta)
                if theta > 1e150:
                    t = 0.5 / theta
                elif theta < -1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                app = m[p][p]
                aqq = m[q][q]
                m[p][p] = app - t * apq
                m[q][q] = aqq + t * apq
                m[p][q] = 0.0
                m[q][p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        aip = m[i][p]
                        aiq = m[i][q]
                        m[i][p] = c * aip - s * aiq
                        m[p][i] = m[i][p]
                        m[i][q] = s * aip + c * aiq
                        m[q][i] = m[i][q]
    else:
        raise ArithmeticError("jacobi_stalled")
    return np.array([m[i][i] for i in range(n)])


def _field(amat, outs, coefs, exps, x, fx):
    """fx <- A x + Phi(x) with Phi given as monomial terms."""
    n = len(x)
    for i in range(n):
        acc = 0.0
        row = amat[i]
        for j in range(n):
            acc += row[j] * x[j]
        fx[i] = acc
    for t in range(len(outs)):
        v = coefs[t]
        et = exps[t]
        for j in range(n):
            k = et[j]
            while k > 0:
                v *= x[j]
                k -= 1
        fx[outs[t]] += v


def _field_jacobian(amat, outs, coefs, exps, x, jac):
    """jac <- A + dPhi/dx at x."""
    n = len(x)
    for i in range(n):
        row = amat[i]
        for j in range(n):
            jac[i][j] = row[j]
    for t in range(len(outs)):
        et = exps[t]
        o = outs[t]
        for j in range(n):
            ej = et[j]
            if ej == 0:
                continue
            v = coefs[t] * float(ej)
            for i in range(n):
                k = et[i]
                if i == j:
                    k -= 1
                while k > 0:
                    v *= x[i]
                    k -= 1
            jac[o][j] += v


def _solve_inplace(mat, rhs, n):
    """Gaussian elimination with partial pivoting; mat and rhs are clobbered."""
    for col in range(n):
        piv = col
        best = abs(mat[col][col])
        for r in range(col + 1, n):
            v = abs(mat[r][col])
            if v > best:
                best = v
                piv = r
        if best == 0.0:
            return False
        if piv != col:
            mat[col], mat[piv] = mat[piv], mat[col]
            rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for r in range(col + 1, n):
            factor = mat[r][col] / mat[col][col]
            if factor != 0.0:
                mat[r][col] = 0.0
                for c2 in range(col + 1, n):
                    mat[r][c2] -= factor * mat[col][c2]
                rhs[r] -= factor * rhs[col]
    for col in range(n - 1, -1, -1):
        acc = rhs[col]
        for c2 in range(col + 1, n):
            acc -= mat[col][c2] * rhs[c2]
        rhs[col] = acc / mat[col][col]
    return True


def _norm2(v, n):
    acc = 0.0
    for i in range(n):
        acc += v[i] * v[i]
    return math.sqrt(acc)


def integrate_linpoly(amat, outs, coefs, exps, x0, hs, method,
                      newton_tol, newton_max_iter):
    """Fixed-step integration of dx/dt = A x + Phi(x).

    method 0 = classical RK4, 1 = implicit Euler with damped Newton.
    Returns the (len(hs)+1, n) state array including the initial state.
    """
    a = [[float(v) for v in row] for row in amat]
    to = [int(v) for v in outs]
    tc = [float(v) for v in coefs]
    te = [[int(v) for v in row] for row in exps]
    n = len(x0)
    x = [float(v) for v in x0]
    nsteps = len(hs)
    states = np.empty((nsteps + 1, n))
    states[0] = x

    k1 = [0.0] * n
    k2 = [0.0] * n
    k3 = [0.0] * n
    k4 = [0.0] * n
    xt = [0.0] * n
    g = [0.0] * n
    d = [0.0] * n
    jac = [[0.0] * n for _ in range(n)]

    for step in range(nsteps):
        h = float(hs[step])
        if method == 0:
            _field(a, to, tc, te, x, k1)
            for i in range(n):
                xt[i] = x[i] + 0.5 * h * k1[i]
            _field(a, to, tc, te, xt, k2)
            for i in range(n):
                xt[i] = x[i] + 0.5 * h * k2[i]
            _field(a, to, tc, te, xt, k3)
            for i in range(n):
                xt[i] = x[i] + h * k3[i]
            _field(a, to, tc, te, xt, k4)
            for i in range(n):
                x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        else:
            scale = 1.0 + _norm2(x, n)
            z = list(x)
            converged = False
            for _it in range(newton_max_iter):
                _field(a, to, tc, te, z, k1)
                for i in range(n):
                    g[i] = z[i] - x[i] - h * k1[i]
                gn = _norm2(g, n)
                if gn <= newton_tol * scale:
                    converged = True
                    break
                _field_jacobian(a, to, tc, te, z, jac)
                for i in range(n):
                    for j in range(n):
                        jac[i][j] = -h * jac[i][j]
                    jac[i][i] += 1.0
                    d[i] = g[i]
                if not _solve_inplace(jac, d, n):
                    raise ArithmeticError(f"newton_divergence:{step}")
                damp = 1.0
                improved = False
                for _half in range(LINE_SEARCH_HALVINGS):
                    for i in range(n):
                        xt[i] = z[i] - damp * d[i]
                    _field(a, to, tc, te, xt, k2)
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
            if not math.isfinite(x[i]):
                raise ArithmeticError(f"nonfinite_state:{step}")
        states[step + 1] = x
    return states
