"""Fixed-step integration of the plant and the coupled plant-observer system.

No adaptive stepping: reproducibility of the emitted numbers matters more
than efficiency at desk scale. Autonomous polynomial fields run in the
kernel backend (compiled or pure, bit-identical either way); arbitrary
callables and input-driven systems step through the Python path.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import integrate_linpoly
from .errors import (
    DimensionMismatch,
    EmptyTrace,
    NewtonDivergence,
    NonFiniteState,
    PreconditionViolated,
)
from .systems import eval_phi, jacobian as phi_jacobian

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
_LINE_SEARCH_HALVINGS = 30


@dataclass(frozen=True)
class SimulationTrace:
    """Time-stamped states (and, for observer runs, estimates, error norms
    and Lyapunov values). Error norms are recomputed from the state columns."""

    times: np.ndarray
    states: np.ndarray
    estimates: np.ndarray = None
    error_norms: np.ndarray = None
    lyapunov: np.ndarray = None
    method: str = "rk4"
    warnings: tuple = ()
    region_exit: bool = False


@dataclass(frozen=True)
class ErrorMetrics:
    final_ratio: float
    time_to_one_percent: float  # None when the trace never gets there
    max_lyapunov_increase: float  # None without a Lyapunov column


@dataclass(frozen=True)
class LinearPolynomialField:
    """dx/dt = A x + sum of monomial terms; the structure the kernels integrate."""

    A: np.ndarray
    outs: np.ndarray
    coefs: np.ndarray
    exps: np.ndarray

    @staticmethod
    def from_system(sys):
        arrays = sys.phi_term_arrays()
        if arrays is None:
            return None
        return LinearPolynomialField(np.asarray(sys.A, dtype=float), *arrays)

    @staticmethod
    def coupled_observer(sys, gain):
        """Stacked field for z = (x, xhat) with output injection gain."""
        arrays = sys.phi_term_arrays()
        if arrays is None:
            return None
        outs, coefs, exps = arrays
        n = sys.n
        lc = gain @ sys.C
        a_big = np.zeros((2 * n, 2 * n))
        a_big[:n, :n] = sys.A
        a_big[n:, :n] = lc
        a_big[n:, n:] = sys.A - lc
        zeros = np.zeros_like(exps)
        outs_big = np.concatenate([outs, outs + n])
        coefs_big = np.concatenate([coefs, coefs])
        exps_big = np.vstack([np.hstack([exps, zeros]), np.hstack([zeros, exps])])
        return LinearPolynomialField(
            a_big, outs_big.astype(np.int64), coefs_big, exps_big.astype(np.int64)
        )

    def __call__(self, t, x):
        out = self.A @ x
        for k in range(len(self.outs)):
            v = self.coefs[k]
            for j, e in enumerate(self.exps[k]):
                if e:
                    v *= x[j] ** e
            out[self.outs[k]] += v
        return out


def _step_plan(t0, t1, h):
    if not (h > 0):
        raise PreconditionViolated(f"step size must be positive, got {h}")
    if not (t1 > t0):
        raise PreconditionViolated("need t1 > t0")
    span = t1 - t0
    n_full = int(math.floor(span / h + 1e-9))
    rem = span - n_full * h
    hs = [h] * n_full
    if rem > 1e-12 * max(1.0, abs(t1)):
        hs.append(rem)
    if not hs:
        hs = [span]
    hs = np.asarray(hs)
    times = np.concatenate([[t0], t0 + np.cumsum(hs)])
    return hs, times


def _method_code(method):
    codes = {"rk4": 0, "implicit_euler": 1}
    if method not in codes:
        raise PreconditionViolated(f"unknown method {method!r}")
    return codes[method]


def _fd_jac(f, x):
    n = x.size
    h = 1e-6 * max(1.0, float(np.linalg.norm(x)))
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        jac[:, j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return jac


def _integrate_callable(f, jac, x0, hs, t0, method, newton_tol, newton_max_iter):
    n = x0.size
    states = np.empty((len(hs) + 1, n))
    states[0] = x0
    x = x0.copy()
    t = t0
    for step, h in enumerate(hs):
        h = float(h)
        if method == 0:
            k1 = f(t, x)
            k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
            k4 = f(t + h, x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            tn = t + h
            scale = 1.0 + float(np.linalg.norm(x))
            z = x.copy()
            converged = False
            for _ in range(newton_max_iter):
                g = z - x - h * f(tn, z)
                gn = float(np.linalg.norm(g))
                if gn <= newton_tol * scale:
                    converged = True
                    break
                if jac is not None:
                    jz = jac(tn, z)
                else:
                    jz = _fd_jac(lambda p: f(tn, p), z)
                try:
                    delta = np.linalg.solve(np.eye(n) - h * jz, g)
                except np.linalg.LinAlgError as exc:
                    raise NewtonDivergence(f"singular Newton system at step {step}") from exc
                damp = 1.0
                improved = False
                for _half in range(_LINE_SEARCH_HALVINGS):
                    z_try = z - damp * delta
                    g_try = z_try - x - h * f(tn, z_try)
                    if float(np.linalg.norm(g_try)) < gn:
                        z = z_try
                        improved = True
                        break
                    damp *= 0.5
                if not improved:
                    raise NewtonDivergence(f"no descent direction at step {step}")
            if not converged:
                raise NewtonDivergence(f"Newton stalled at step {step}")
            x = z
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"state became non-finite at step {step}")
        states[step + 1] = x
        t = t + h
    return states


def _translate_kernel_error(exc):
    msg = str(exc)
    kind, _, step = msg.partition(":")
    if kind == "nonfinite_state":
        return NonFiniteState(f"state became non-finite at step {step}")
    if kind == "newton_divergence":
        return NewtonDivergence(f"Newton stalled at step {step}")
    return RuntimeError(msg)


def integrate(f, x0, t0, t1, h, method="rk4", jac=None,
              newton_tol=NEWTON_TOL, newton_max_iter=NEWTON_MAX_ITER):
    """Fixed-step integration of dx/dt = f(t, x); states-only trace.

    f is either a `LinearPolynomialField` (integrated in the kernel backend)
    or any callable (t, x) -> dx. Implicit Euler solves each step with damped
    Newton; `jac` supplies d f/dx for callables, finite differences otherwise.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    hs, times = _step_plan(t0, t1, h)
    code = _method_code(method)
    if isinstance(f, LinearPolynomialField):
        try:
            states = integrate_linpoly(
                np.ascontiguousarray(f.A),
                np.ascontiguousarray(f.outs, dtype=np.int64),
                np.ascontiguousarray(f.coefs, dtype=float),
                np.ascontiguousarray(f.exps, dtype=np.int64),
                x0,
                hs,
                code,
                newton_tol,
                newton_max_iter,
            )
        except ArithmeticError as exc:
            raise _translate_kernel_error(exc) from exc
    else:
        states = _integrate_callable(
            f, jac, x0, hs, t0, code, newton_tol, newton_max_iter
        )
    return SimulationTrace(times=times, states=states, method=method)


def plant_field(sys, u=None):
    """Vector field of the plant alone; kernel-structured when possible."""
    if u is None:
        structured = LinearPolynomialField.from_system(sys)
        if structured is not None:
            return structured
    a = sys.A

    def f(t, x):
        uu = u(t) if u is not None else None
        return a @ x + eval_phi(sys, x, uu)

    return f


def _observer_field(sys, gain, u):
    n = sys.n
    a = sys.A
    c = sys.C
    lc = gain @ c

    def f(t, z):
        x = z[:n]
        xh = z[n:]
        uu = u(t) if u is not None else None
        dx = a @ x + eval_phi(sys, x, uu)
        dxh = a @ xh + eval_phi(sys, xh, uu) + lc @ (x - xh)
        return np.concatenate([dx, dxh])

    def jac(t, z):
        x = z[:n]
        xh = z[n:]
        uu = u(t) if u is not None else None
        big = np.zeros((2 * n, 2 * n))
        big[:n, :n] = a + phi_jacobian(sys, x, uu)
        big[n:, :n] = lc
        big[n:, n:] = a - lc + phi_jacobian(sys, xh, uu)
        return big

    return f, jac


def _region_exit_scan(sys, pts):
    region = sys.region
    if region.shape == "ball":
        outside = np.linalg.norm(pts, axis=1) > region.r * (1.0 + 1e-9)
    else:
        lo = np.asarray(region.lower)
        up = np.asarray(region.upper)
        pad = 1e-9 * np.maximum(1.0, np.abs(lo) + np.abs(up))
        outside = np.any((pts < lo - pad) | (pts > up + pad), axis=1)
    if not np.any(outside):
        return None
    return int(np.argmax(outside))


def simulate_observer(sys, design, x0, xhat0, t1, h, t0=0.0, u=None,
                      method="rk4", P=None):
    """Integrate the coupled plant-observer system; y = C x drives the
    observer through the design gain.

    Initial states outside the operational region produce a warning, not an
    error; leaving the region mid-run sets the region_exit flag. The Lyapunov
    column e'Pe is filled when P is given.
    """
    gain = np.asarray(design.L if hasattr(design, "L") else design, dtype=float)
    n = sys.n
    if gain.shape != (n, sys.p):
        raise DimensionMismatch(f"gain is {gain.shape}, expected ({n}, {sys.p})")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xhat0 = np.asarray(xhat0, dtype=float).reshape(-1)
    if x0.shape != (n,) or xhat0.shape != (n,):
        raise DimensionMismatch(f"initial states must have length {n}")

    warnings = []
    if not sys.region.contains(x0):
        warnings.append("initial plant state lies outside the operational region")
    if not sys.region.contains(xhat0):
        warnings.append("initial observer state lies outside the operational region")

    z0 = np.concatenate([x0, xhat0])
    hs, times = _step_plan(t0, t1, h)
    code = _method_code(method)

    structured = None
    if u is None:
        structured = LinearPolynomialField.coupled_observer(sys, gain)
    if structured is not None:
        try:
            states = integrate_linpoly(
                np.ascontiguousarray(structured.A),
                np.ascontiguousarray(structured.outs, dtype=np.int64),
                np.ascontiguousarray(structured.coefs, dtype=float),
                np.ascontiguousarray(structured.exps, dtype=np.int64),
                z0,
                hs,
                code,
                NEWTON_TOL,
                NEWTON_MAX_ITER,
            )
        except ArithmeticError as exc:
            raise _translate_kernel_error(exc) from exc
    else:
        f, jac = _observer_field(sys, gain, u)
        states = _integrate_callable(f, jac, z0, hs, t0, code, NEWTON_TOL, NEWTON_MAX_ITER)

    plant = states[:, :n]
    estimates = states[:, n:]
    err = np.linalg.norm(plant - estimates, axis=1)
    lyap = None
    if P is not None:
        p = np.asarray(P, dtype=float)
        e = plant - estimates
        lyap = np.einsum("ij,jk,ik->i", e, p, e)

    region_exit = False
    for pts in (plant, estimates):
        k = _region_exit_scan(sys, pts)
        if k is not None:
            region_exit = True
            warnings.append(
                f"trajectory left the operational region at t = {times[k]:.6g}"
            )
            break

    return SimulationTrace(
        times=times,
        states=plant,
        estimates=estimates,
        error_norms=err,
        lyapunov=lyap,
        method=method,
        warnings=tuple(warnings),
        region_exit=region_exit,
    )


def error_metrics(trace):
    """Convergence summary of an observer trace."""
    if trace.times is None or len(trace.times) == 0:
        raise EmptyTrace("trace has no samples")
    if trace.error_norms is None:
        raise EmptyTrace("trace has no observer error column")
    err = trace.error_norms
    e0 = float(err[0])
    ef = float(err[-1])
    if e0 == 0.0:
        ratio = 0.0 if ef == 0.0 else math.inf
        t_small = float(trace.times[0])
    else:
        ratio = ef / e0
        below = np.nonzero(err <= 0.01 * e0)[0]
        t_small = float(trace.times[below[0]]) if below.size else None
    max_inc = None
    if trace.lyapunov is not None and len(trace.lyapunov) > 1:
        max_inc = float(np.max(np.diff(trace.lyapunov)))
    elif trace.lyapunov is not None:
        max_inc = 0.0
    return ErrorMetrics(
        final_ratio=ratio,
        time_to_one_percent=t_small,
        max_lyapunov_increase=max_inc,
    )


def write_csv(trace, path):
    """Trace as CSV: t,x1..xn,xhat1..xhatn,err_norm[,V]; 17 significant
    digits, UNIX newlines."""
    n = trace.states.shape[1]
    cols = [trace.times, *[trace.states[:, i] for i in range(n)]]
    header = ["t"] + [f"x{i + 1}" for i in range(n)]
    if trace.estimates is not None:
        cols += [trace.estimates[:, i] for i in range(n)]
        header += [f"xhat{i + 1}" for i in range(n)]
        cols.append(trace.error_norms)
        header.append("err_norm")
    if trace.lyapunov is not None:
        cols.append(trace.lyapunov)
        header.append("V")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
