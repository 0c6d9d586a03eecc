"""Certificate checking for observer designs.

Checks the nonlinear matrix-inequality certificate (four inequalities), its
LMI relaxation (block form), the scalar Lyapunov-derivative bound, and a
classical small-Lipschitz baseline. Checkers certify the matrix conditions
only; every report carries the caveat that the conclusion is valid in the
intersection of the regions on which the declared constants hold.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EquationResidualTooLarge,
    NotPositiveDefinite,
    NotPositiveDefiniteP,
    PreconditionViolated,
)
from .linalg import as_matrix, spectral_norm, sym_spectrum

STRICT_SLACK = 1e-9
REGION_CAVEAT = (
    "matrix conditions only: valid in the intersection of the regions on "
    "which the one-sided and inner-bound constants hold"
)


@dataclass(frozen=True)
class Inequality:
    label: str
    margin: float
    holds: bool


@dataclass(frozen=True)
class CertificateReport:
    name: str
    inequalities: tuple
    overall: bool
    notes: tuple = (REGION_CAVEAT,)

    def margin(self, label):
        for ineq in self.inequalities:
            if ineq.label == label:
                return ineq.margin
        raise KeyError(label)


def xi_value(rho, beta, gamma, alpha):
    """Aggregate feasibility scalar (beta+1) + rho*(gamma + 2*alpha)."""
    return (beta + 1.0) + rho * (gamma + 2.0 * alpha)


def _gain_dims(a, c, l):
    a = as_matrix(a, "A")
    c = as_matrix(c, "C")
    l = as_matrix(l, "L")
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionMismatch(f"A is {a.shape}, expected square")
    if c.shape[1] != n:
        raise DimensionMismatch(f"C is {c.shape}, expected (p, {n})")
    if l.shape != (n, c.shape[0]):
        raise DimensionMismatch(f"L is {l.shape}, expected ({n}, {c.shape[0]})")
    return a, c, l


def _spd_extremes(p, name="P"):
    spec = sym_spectrum(p)
    if spec.min <= 0.0:
        raise NotPositiveDefiniteP(f"{name} has lambda_min = {spec.min:.3e}")
    return spec.min, spec.max


def check_theorem1(a, c, l, p, q, alpha, rho, beta, gamma):
    """Nonlinear matrix-inequality certificate.

    Margins (holds iff the first is >= 0 and the rest exceed the strict
    slack): the Lyapunov inequality residual, the eigenvalue scalar
    inequality, the gamma window, and the condition-number bound. Q may be
    indefinite.
    """
    a, c, l = _gain_dims(a, c, l)
    if alpha <= 0:
        raise PreconditionViolated("alpha must be positive")
    p = as_matrix(p, "P")
    q = as_matrix(q, "Q")
    if p.shape != a.shape or q.shape != a.shape:
        raise DimensionMismatch("P and Q must match A in shape")
    pmin, pmax = _spd_extremes(p)
    qspec = sym_spectrum(q)
    m = a - l @ c
    s = m.T @ p + p @ m
    xi = xi_value(rho, beta, gamma, alpha)

    m1 = -sym_spectrum(0.5 * ((s + q) + (s + q).T)).max
    m2 = alpha * qspec.min - xi * pmax + pmin
    m3 = gamma + 2.0 * alpha
    m4 = alpha**2 - (pmax / pmin) * (alpha**2 - 1.0)

    ineqs = (
        Inequality("thm1.lyap", float(m1), m1 >= 0.0),
        Inequality("thm1.scalar", float(m2), m2 > STRICT_SLACK),
        Inequality("thm1.gamma", float(m3), m3 > STRICT_SLACK),
        Inequality("thm1.kappa", float(m4), m4 > STRICT_SLACK),
    )
    return CertificateReport(
        name="theorem1",
        inequalities=ineqs,
        overall=all(i.holds for i in ineqs),
    )


def corollary1_block_margins(a, c, l, lam, alpha, xi):
    """The LMI block margin two ways: lambda_min of the 2n x 2n block and the
    equivalent Schur form (lam-xi)/(2 alpha) - sigma_max(A-LC)."""
    a, c, l = _gain_dims(a, c, l)
    m = a - l @ c
    n = m.shape[0]
    shift = (lam - xi) / (2.0 * alpha)
    block = np.block([[shift * np.eye(n), m.T], [m, shift * np.eye(n)]])
    b_block = sym_spectrum(0.5 * (block + block.T)).min
    b_schur = shift - spectral_norm(m)
    return float(b_block), float(b_schur)


def check_corollary1(a, c, l, lam, alpha, rho, beta, gamma):
    """LMI certificate: block positivity, gamma window, lambda lower bound,
    and lambda inside the unit interval."""
    if alpha <= 0:
        raise PreconditionViolated("alpha must be positive")
    xi = xi_value(rho, beta, gamma, alpha)
    b1, _ = corollary1_block_margins(a, c, l, lam, alpha, xi)
    b2 = gamma + 2.0 * alpha
    b3 = lam - (1.0 - 1.0 / alpha**2)
    b4 = min(lam, 1.0 - lam)
    ineqs = (
        Inequality("cor1.block", float(b1), b1 > STRICT_SLACK),
        Inequality("cor1.gamma", float(b2), b2 > STRICT_SLACK),
        Inequality("cor1.lambda", float(b3), b3 > STRICT_SLACK),
        Inequality("cor1.lambda_unit", float(b4), b4 > STRICT_SLACK),
    )
    return CertificateReport(
        name="corollary1",
        inequalities=ineqs,
        overall=all(i.holds for i in ineqs),
    )


def lyapunov_certificate(a, c, l, alpha, xi, p):
    """Scalar bound on the Lyapunov derivative:
    (xi/alpha) lambda_max(P) + lambda_max((A-LC)'P + P(A-LC) - P/alpha).

    Negative certifies a decreasing Lyapunov value wherever the constants
    behind xi are valid.
    """
    a, c, l = _gain_dims(a, c, l)
    if alpha <= 0:
        raise PreconditionViolated("alpha must be positive")
    p = as_matrix(p, "P")
    _, pmax = _spd_extremes(p)
    m = a - l @ c
    s = m.T @ p + p @ m - p / alpha
    return float((xi / alpha) * pmax + sym_spectrum(0.5 * (s + s.T)).max)


def construct_P(lam, n):
    """Canonical diagonal P = diag(1/lam, 1, ..., 1) with condition number
    1/lam; any P with that condition number certifies equally."""
    if not (0.0 < lam < 1.0):
        raise PreconditionViolated(f"lambda must lie in (0, 1), got {lam}")
    if n < 2:
        raise PreconditionViolated("need n >= 2 for a non-degenerate condition number")
    d = np.ones(n)
    d[0] = 1.0 / lam
    return np.diag(d)


def conservative_lipschitz_margin(a, c, l, p, q, lip):
    """Classical sufficient-condition margin lambda_min(Q)/(2 lambda_max(P)) - lip
    for a Lipschitz observer with (A-LC)'P + P(A-LC) = -Q."""
    a, c, l = _gain_dims(a, c, l)
    p = as_matrix(p, "P")
    q = as_matrix(q, "Q")
    _, pmax = _spd_extremes(p)
    qspec = sym_spectrum(q)
    if qspec.min <= 0.0:
        raise NotPositiveDefinite(f"Q has lambda_min = {qspec.min:.3e}")
    m = a - l @ c
    residual = np.max(np.abs(m.T @ p + p @ m + q))
    if residual > 1e-8:
        raise EquationResidualTooLarge(
            f"(A-LC)'P + P(A-LC) + Q has max residual {residual:.3e}"
        )
    return float(qspec.min / (2.0 * pmax) - lip)
