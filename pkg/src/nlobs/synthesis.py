"""Observer-gain synthesis.

The LMI certificate is equivalent, by Schur complement, to the bound
sigma_max(A - LC) < (lambda - xi)/(2 alpha), and L = A C^+ minimizes
sigma_max(A - LC) over all gains (since (A - LC) P_ker = A P_ker for every
L). Synthesis therefore uses that closed-form gain as the single design
path: if the LMI is feasible for any gain it is feasible at L = A C^+, so
no semidefinite solver is needed and no feasible instance is lost.
"""

from dataclasses import dataclass

import numpy as np

from .certificates import check_corollary1, xi_value
from .errors import (
    DimensionMismatch,
    NoFeasibleAlpha,
    NotPositiveDefiniteP,
    PreconditionViolated,
    StructurallyInfeasible,
)
from .linalg import (
    as_matrix,
    kernel_projector,
    log_norm2,
    right_pseudo_inverse,
    spectral_norm,
    sym_spectrum,
)

ALPHA_SWEEP_POINTS = 40


@dataclass(frozen=True)
class FeasibilityWindow:
    """Open interval of lambda values for which the design certificate holds
    at the optimal gain; empty is a value, not an error."""

    lambda_low: float
    lambda_high: float
    empty: bool

    def contains(self, lam):
        return (not self.empty) and self.lambda_low < lam < self.lambda_high

    @property
    def width(self):
        return 0.0 if self.empty else self.lambda_high - self.lambda_low

    @property
    def midpoint(self):
        return 0.5 * (self.lambda_low + self.lambda_high)


@dataclass(frozen=True)
class ObserverDesign:
    """Gain plus the scalars and margins that certify it."""

    L: np.ndarray
    alpha: float
    lam: float
    xi: float
    sigma_star: float
    rho: float
    beta: float
    gamma: float
    window: FeasibilityWindow
    margins: dict


def min_gain(a, c):
    """Spectral-norm-minimizing gain L = A C^+ and the attained minimum
    sigma* = sigma_max(A P_ker); requires C of full row rank."""
    a = as_matrix(a, "A")
    c = as_matrix(c, "C")
    if a.shape[0] != a.shape[1] or c.shape[1] != a.shape[0]:
        raise DimensionMismatch(f"incompatible shapes A {a.shape}, C {c.shape}")
    l = a @ right_pseudo_inverse(c)
    sigma_star = spectral_norm(a @ kernel_projector(c))
    return l, sigma_star


def feasibility_window(rho, beta, gamma, alpha, sigma_star):
    """Interval of lambda for which all design inequalities hold at sigma*.

    lambda must exceed xi + 2*alpha*sigma*, 1 - 1/alpha^2, and 0, and stay
    below 1; the window is empty when gamma + 2*alpha <= 0 or the interval
    collapses.
    """
    if alpha <= 0:
        raise PreconditionViolated("alpha must be positive")
    xi = xi_value(rho, beta, gamma, alpha)
    low = max(xi + 2.0 * alpha * sigma_star, 1.0 - 1.0 / alpha**2, 0.0)
    high = 1.0
    empty = (gamma + 2.0 * alpha <= 0.0) or (low >= high)
    return FeasibilityWindow(lambda_low=low, lambda_high=high, empty=empty)


def _pick_alpha(rho, beta, gamma, sigma_star):
    if gamma > -2.0:
        window = feasibility_window(rho, beta, gamma, 1.0, sigma_star)
        if window.empty:
            raise NoFeasibleAlpha(
                "default alpha = 1 gives an empty window; pass alpha explicitly"
            )
        return 1.0, window
    # Feasible alpha sets hug -gamma/2 (the window shuts as alpha grows),
    # so log-space the offsets from -gamma/2 rather than the values: a
    # value-spaced grid over the same span skips past narrow feasible
    # intervals just above the endpoint.
    offsets = np.geomspace(1e-4, 999.0, ALPHA_SWEEP_POINTS)
    candidates = -gamma / 2.0 * (1.0 + offsets)
    best = None
    for cand in candidates:
        window = feasibility_window(rho, beta, gamma, float(cand), sigma_star)
        if window.empty:
            continue
        if best is None or window.width > best[1].width:
            best = (float(cand), window)
    if best is None:
        raise NoFeasibleAlpha(
            f"no feasible alpha among {ALPHA_SWEEP_POINTS} sweep candidates"
        )
    return best


def design_observer(a, c, rho, beta, gamma, alpha=None):
    """Full design procedure: closed-form gain, alpha selection, feasibility
    check, lambda at the window midpoint, certified margins.

    alpha policy when unspecified: alpha = 1 whenever gamma > -2, otherwise a
    logarithmic sweep just above -gamma/2 keeping the widest window.
    """
    l, sigma_star = min_gain(a, c)
    if rho == 0.0 and beta >= 0.0:
        raise StructurallyInfeasible("rho = 0 requires beta < 0")
    if alpha is None:
        alpha, window = _pick_alpha(rho, beta, gamma, sigma_star)
    else:
        if alpha <= 0:
            raise PreconditionViolated("alpha must be positive")
        window = feasibility_window(rho, beta, gamma, alpha, sigma_star)
        if window.empty:
            raise NoFeasibleAlpha(f"window is empty at the supplied alpha {alpha}")
    lam = window.midpoint
    report = check_corollary1(a, c, l, lam, alpha, rho, beta, gamma)
    return ObserverDesign(
        L=l,
        alpha=float(alpha),
        lam=float(lam),
        xi=xi_value(rho, beta, gamma, alpha),
        sigma_star=sigma_star,
        rho=rho,
        beta=beta,
        gamma=gamma,
        window=window,
        margins={i.label: i.margin for i in report.inequalities},
    )


def max_admissible_rho(a, c, beta, gamma, alpha):
    """Supremum of one-sided Lipschitz constants certifiable at this alpha:
    (-beta - 2*alpha*sigma*)/(gamma + 2*alpha), the lambda -> 1 limit.

    A supremum, not attained: designs must back off below it. At fixed beta
    with -beta > 2*alpha*sigma*, the value grows without bound as alpha
    approaches -gamma/2 from above, which is why alpha is a fixed input here.
    """
    if alpha <= 0 or gamma + 2.0 * alpha <= 0:
        raise PreconditionViolated("need alpha > 0 and gamma + 2*alpha > 0")
    _, sigma_star = min_gain(a, c)
    return (-beta - 2.0 * alpha * sigma_star) / (gamma + 2.0 * alpha)


@dataclass(frozen=True)
class IdentityPReport:
    """Outcome of the identity-Lyapunov (P = I) analysis route."""

    sufficient: bool
    sufficient_margin: float
    necessary: bool
    necessary_margin: float
    shift_feasible: bool
    shift_alpha: float
    log_norm: float
    max_real_eig: float
    eig_method: str


def identity_P_analysis(a, c, l, rho):
    """Three checks for the P = I route.

    sufficient: mu(A-LC) + rho < 0; necessary: every eigenvalue real part of
    A-LC below -rho (eigenvalues via LAPACK QR iteration, recorded in
    eig_method); shift: some alpha above the spectral abscissa with
    rho < -alpha exists, equivalent to the necessary condition.
    """
    a = as_matrix(a, "A")
    c = as_matrix(c, "C")
    l = as_matrix(l, "L")
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch("A must be square")
    if c.shape[1] != a.shape[0] or l.shape != (a.shape[0], c.shape[0]):
        raise DimensionMismatch("inconsistent A/C/L dimensions")
    m = a - l @ c
    mu = log_norm2(m)
    max_re = float(np.max(np.linalg.eigvals(m).real))
    suff_margin = -(mu + rho)
    nec_margin = -(max_re + rho)
    shift_ok = nec_margin > 0.0
    return IdentityPReport(
        sufficient=suff_margin > 0.0,
        sufficient_margin=float(suff_margin),
        necessary=nec_margin > 0.0,
        necessary_margin=float(nec_margin),
        shift_feasible=shift_ok,
        shift_alpha=0.5 * (max_re + (-rho)) if shift_ok else float("nan"),
        log_norm=float(mu),
        max_real_eig=max_re,
        eig_method="qr",
    )


def check_weighted_osl_lmi(a, c, l, p, rho):
    """Signed margin -lambda_max((A-LC)'P + P(A-LC) + 2 rho I) of the
    weighted-condition stability LMI at a fixed P; positive means it holds.

    Checker only: the joint search over (P, rho, L) is out of scope.
    """
    a = as_matrix(a, "A")
    c = as_matrix(c, "C")
    l = as_matrix(l, "L")
    p = as_matrix(p, "P")
    pspec = sym_spectrum(p)
    if pspec.min <= 0.0:
        raise NotPositiveDefiniteP(f"P has lambda_min = {pspec.min:.3e}")
    m = a - l @ c
    s = m.T @ p + p @ m + 2.0 * rho * np.eye(m.shape[0])
    return float(-sym_spectrum(0.5 * (s + s.T)).max)
