"""Estimation and verification of the regularity constants of Phi over a
region: the Lipschitz constant, the one-sided Lipschitz constant, and the
quadratic inner-bound pair (beta, gamma).

All estimates are sampled lower bounds on the true suprema: they come with
extremal witnesses and the report language is "no violation found at N
samples", never "proved". Sampling is deterministic given the plan seed, and
every sample set includes the region center, boundary shells along fixed
directions, and a geometric radial ladder per direction, so the coincidence
limits that drive the suprema (and the near-origin corner that breaks naive
inner-bound fits) are always covered.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyRegion,
    InfeasibleSamples,
    NotDifferentiableAtPoint,
    PreconditionViolated,
    Unbounded,
)
from .linalg import log_norm2, spectral_norm
from .systems import Region, eval_phi_batch, jacobian, region_contains

GAMMA_MARGIN = 1e-9
_LADDER = tuple(2.0 ** -k for k in range(1, 13))
_PAIR_SEP_DECADES = (-6.0, -2.0)  # pair separations span [1e-6, 1e-2] x scale


@dataclass(frozen=True)
class SamplePlan:
    """How to draw sample points and pairs from a region.

    random mode draws `count` uniform interior points (plus the deterministic
    structured points) with the given seed; grid mode uses a lattice with
    `points_per_axis` nodes per axis and needs no seed. `pair_count` pairs are
    formed either way, half of them near-diagonal.
    """

    mode: str = "random"
    count: int = 512
    seed: int = 42
    points_per_axis: int = 9
    pair_count: int = 2000


@dataclass(frozen=True)
class Witness:
    kind: str  # "pair" | "jacobian"
    value: float
    x1: np.ndarray
    x2: np.ndarray = None


@dataclass(frozen=True)
class RegularityEstimate:
    """Sampled constants with their witnesses; rho <= lip always holds
    because both come from the same samples."""

    rho: float
    lip: float
    beta: float
    gamma: float
    region: Region
    witnesses: dict
    method: str


@dataclass(frozen=True)
class QibReport:
    violations: int
    worst_slack: float
    worst_pair: tuple
    checked: int


# --- sample generation ---------------------------------------------------

def _directions(n, rng):
    dirs = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        dirs.append(e.copy())
        dirs.append(-e)
    extra = max(8, 2 * n)
    if rng is None:
        # deterministic extras for grid mode: normalized odd-harmonic rays
        for k in range(extra):
            v = np.cos(np.arange(1, n + 1) * (k + 1) * 0.7391)
            nrm = np.linalg.norm(v)
            if nrm > 0:
                dirs.append(v / nrm)
    else:
        v = rng.normal(size=(extra, n))
        nrm = np.linalg.norm(v, axis=1, keepdims=True)
        keep = nrm[:, 0] > 1e-12
        dirs.extend(v[keep] / nrm[keep])
    return np.asarray(dirs)


def _uniform_points(region, count, rng):
    n = region.dim
    if region.shape == "ball":
        v = rng.normal(size=(count, n))
        nrm = np.linalg.norm(v, axis=1, keepdims=True)
        nrm[nrm == 0.0] = 1.0
        radii = region.r * rng.uniform(size=(count, 1)) ** (1.0 / n)
        return v / nrm * radii
    lo = np.asarray(region.lower)
    up = np.asarray(region.upper)
    return lo + rng.uniform(size=(count, n)) * (up - lo)


def _structured_points(region, rng):
    """Center, boundary shell, and radial ladder; deterministic given rng state."""
    center = region.center()
    pts = [center]
    dirs = _directions(region.dim, rng)
    if region.shape == "ball":
        for d in dirs:
            pts.append(region.r * d)
            for tau in _LADDER:
                pts.append(region.r * tau * d)
    else:
        lo = np.asarray(region.lower)
        up = np.asarray(region.upper)
        half = 0.5 * (up - lo)
        for d in dirs:
            # scale the ray to touch the box boundary from the center
            denom = np.max(np.abs(d) / half)
            edge = center + d / denom
            pts.append(edge)
            for tau in _LADDER:
                pts.append(center + tau * (edge - center))
    return np.asarray(pts)


def _grid_points(region, plan):
    n = region.dim
    k = max(2, plan.points_per_axis)
    if region.shape == "ball":
        axes = [np.linspace(-region.r, region.r, k)] * n
    else:
        axes = [np.linspace(lo, up, k) for lo, up in zip(region.lower, region.upper)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    if region.shape == "ball":
        mesh = mesh[np.linalg.norm(mesh, axis=1) <= region.r * (1 + 1e-12)]
    return mesh


def _sample_points(region, plan):
    if plan.mode == "random":
        rng = np.random.default_rng(plan.seed)
        structured = _structured_points(region, rng)
        uniform = _uniform_points(region, plan.count, rng)
        pts = np.vstack([structured, uniform])
    elif plan.mode == "grid":
        structured = _structured_points(region, None)
        pts = np.vstack([structured, _grid_points(region, plan)])
    else:
        raise PreconditionViolated(f"unknown sample mode {plan.mode!r}")
    if pts.size == 0:
        raise EmptyRegion("sampling produced no points")
    return pts


def _near_pairs(region, anchors, count, rng):
    n = region.dim
    idx = np.arange(count) % len(anchors)
    base = anchors[idx]
    if rng is None:
        d = _directions(n, None)
        dirs = d[np.arange(count) % len(d)]
        decades = np.linspace(_PAIR_SEP_DECADES[0], _PAIR_SEP_DECADES[1], 5)
        seps = 10.0 ** decades[np.arange(count) % len(decades)]
    else:
        dirs = rng.normal(size=(count, n))
        nrm = np.linalg.norm(dirs, axis=1, keepdims=True)
        nrm[nrm == 0.0] = 1.0
        dirs = dirs / nrm
        seps = 10.0 ** rng.uniform(*_PAIR_SEP_DECADES, size=count)
    delta = (region.scale() * seps)[:, None] * dirs
    x1 = np.array([region.clip(p) for p in base + 0.5 * delta])
    x2 = np.array([region.clip(p) for p in base - 0.5 * delta])
    return x1, x2


def _sample_pairs(region, pts, plan):
    near = plan.pair_count // 2
    far = plan.pair_count - near
    if plan.mode == "random":
        # pairs use their own stream so point sampling stays reusable
        rng = np.random.default_rng((plan.seed, 1))
        x1n, x2n = _near_pairs(region, pts, near, rng)
        x1f = _uniform_points(region, far, rng)
        x2f = _uniform_points(region, far, rng)
    else:
        x1n, x2n = _near_pairs(region, pts, near, None)
        half = len(pts) // 2
        reps = int(np.ceil(far / max(half, 1)))
        x1f = np.tile(pts[:half], (reps, 1))[:far]
        x2f = np.tile(pts[half: 2 * half], (reps, 1))[:far]
    x1 = np.vstack([x1n, x1f])
    x2 = np.vstack([x2n, x2f])
    keep = np.linalg.norm(x1 - x2, axis=1) > 0.0
    return x1[keep], x2[keep]


# --- shared estimation data ----------------------------------------------

@dataclass(frozen=True)
class _SampleData:
    points: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    a: np.ndarray  # ||dx||^2
    b: np.ndarray  # <dx, dPhi>
    c: np.ndarray  # ||dPhi||^2
    jac_points: np.ndarray
    jac_lip: np.ndarray  # sigma_max of dPhi/dx per point
    jac_osl: np.ndarray  # log norm of dPhi/dx per point


def _effective_region(sys, region):
    if region is None:
        return sys.region
    if region.dim != sys.n:
        raise PreconditionViolated(
            f"region dim {region.dim} != state dim {sys.n}"
        )
    if not region_contains(sys.region, region):
        raise PreconditionViolated("estimation region must lie inside the system region")
    return region


def _collect(sys, region, plan):
    region = _effective_region(sys, region)
    if plan.pair_count < 100:
        raise PreconditionViolated("estimation requires pair_count >= 100")
    pts = _sample_points(region, plan)
    x1, x2 = _sample_pairs(region, pts, plan)
    if len(x1) == 0:
        raise EmptyRegion("no usable sample pairs")
    d = x1 - x2
    dphi = eval_phi_batch(sys, x1) - eval_phi_batch(sys, x2)
    a = np.einsum("ij,ij->i", d, d)
    b = np.einsum("ij,ij->i", d, dphi)
    c = np.einsum("ij,ij->i", dphi, dphi)

    jac_pts = []
    jac_lip = []
    jac_osl = []
    builtin_kind = sys.phi.kind == "builtin"
    for x in pts:
        if builtin_kind and float(np.linalg.norm(x)) < 1e-8:
            continue  # nondifferentiable-origin guard
        try:
            jac = jacobian(sys, x)
        except NotDifferentiableAtPoint:
            continue
        jac_pts.append(x)
        jac_lip.append(spectral_norm(jac))
        jac_osl.append(log_norm2(jac))
    return region, _SampleData(
        points=pts,
        x1=x1,
        x2=x2,
        a=a,
        b=b,
        c=c,
        jac_points=np.asarray(jac_pts),
        jac_lip=np.asarray(jac_lip),
        jac_osl=np.asarray(jac_osl),
    )


def _lip_from(data):
    # Cauchy-Schwarz gives <dx,dPhi>/||dx||^2 <= ||dPhi||/||dx|| pairwise and
    # Fan's theorem gives the same per Jacobian; the elementwise maximum only
    # guards the one-ulp rounding between the two expressions so the
    # rho <= lip ordering also holds bitwise on shared samples.
    ratios = np.maximum(np.sqrt(data.c / data.a), data.b / data.a)
    i = int(np.argmax(ratios))
    best = Witness("pair", float(ratios[i]), data.x1[i], data.x2[i])
    if data.jac_lip.size:
        jac_vals = np.maximum(data.jac_lip, data.jac_osl)
        j = int(np.argmax(jac_vals))
        if jac_vals[j] > best.value:
            best = Witness("jacobian", float(jac_vals[j]), data.jac_points[j])
    return best


def _osl_from(data):
    ratios = data.b / data.a
    i = int(np.argmax(ratios))
    best = Witness("pair", float(ratios[i]), data.x1[i], data.x2[i])
    if data.jac_osl.size:
        j = int(np.argmax(data.jac_osl))
        if data.jac_osl[j] > best.value:
            best = Witness("jacobian", float(data.jac_osl[j]), data.jac_points[j])
    return best


def estimate_lipschitz(sys, region=None, plan=None):
    """Sampled Lipschitz constant: max of pairwise ratios ||dPhi||/||dx|| and
    of sigma_max(dPhi/dx) at sample points. Lower bound on the true constant."""
    _, data = _collect(sys, region, plan or SamplePlan())
    return _lip_from(data).value


def estimate_osl(sys, region=None, plan=None):
    """Sampled one-sided Lipschitz constant: max of <dPhi,dx>/||dx||^2 and of
    the Jacobian logarithmic norm. May be negative; lower bound on the truth."""
    _, data = _collect(sys, region, plan or SamplePlan())
    return _osl_from(data).value


# --- quadratic inner bound ------------------------------------------------

def _upper_envelope(slopes, intercepts):
    """Upper envelope of lines y = intercept + slope * g.

    Returns (slopes, intercepts, breakpoints) of the kept lines ordered by
    slope; breakpoints[k] is where line k hands over to line k+1.
    """
    order = np.lexsort((intercepts, slopes))
    s = slopes[order]
    u = intercepts[order]
    hull_s, hull_u = [], []
    for k in range(len(s)):
        sk, uk = float(s[k]), float(u[k])
        if hull_s and sk == hull_s[-1]:
            if uk <= hull_u[-1]:
                continue
            hull_s.pop()
            hull_u.pop()
        while len(hull_s) >= 2:
            # handover of new line vs hull[-1], both against hull[-2]
            x_new = (hull_u[-2] - uk) / (sk - hull_s[-2])
            x_old = (hull_u[-2] - hull_u[-1]) / (hull_s[-1] - hull_s[-2])
            if x_new <= x_old:
                hull_s.pop()
                hull_u.pop()
            else:
                break
        hull_s.append(sk)
        hull_u.append(uk)
    bps = [
        (hull_u[k] - hull_u[k + 1]) / (hull_s[k + 1] - hull_s[k])
        for k in range(len(hull_s) - 1)
    ]
    return hull_s, hull_u, bps


def qib_estimate(sys, region=None, plan=None, alpha=1.0, rho=0.0):
    """Best sampled inner-bound pair: minimize xi = beta + rho(gamma+2alpha) + 1
    subject to every sampled pair constraint and gamma + 2 alpha > 0.

    Solved exactly on the samples: the constraints reduce to beta >= f(gamma)
    with f the upper envelope of one line per pair, so the optimum sits at an
    envelope breakpoint (a pairwise constraint intersection) or at the gamma
    margin. Raises Unbounded when the sampled LP has no finite minimum.
    """
    if alpha <= 0:
        raise PreconditionViolated("alpha must be positive")
    plan = plan or SamplePlan()
    _, data = _collect(sys, region, plan)
    return _qib_lp(data.a, data.b, data.c, alpha, rho)


def _qib_lp(a, b, c, alpha, rho):
    degenerate = a <= 0.0
    if np.any(degenerate & (c > 0.0)):
        raise InfeasibleSamples("coincident points with differing Phi values")
    a, b, c = a[~degenerate], b[~degenerate], c[~degenerate]
    if len(a) < 100:
        raise PreconditionViolated("fewer than 100 usable pairs after filtering")

    gamma_min = GAMMA_MARGIN - 2.0 * alpha
    # constraint per pair: beta >= u + s * gamma  with u = c/a, s = -b/a
    u = c / a
    s = -(b / a)
    hull_s, hull_u, bps = _upper_envelope(s, u)

    # objective h(gamma) = f(gamma) + rho * gamma (constant terms dropped);
    # h is convex piecewise-linear, so walk segments left to right until
    # the slope turns nonnegative
    k0 = 0
    while k0 < len(bps) and bps[k0] < gamma_min:
        k0 += 1
    lo = gamma_min
    opt_lo = opt_hi = None
    for k in range(k0, len(hull_s)):
        seg_slope = hull_s[k] + rho
        hi = bps[k] if k < len(bps) else math.inf
        if seg_slope > 0.0:
            if opt_lo is None:
                opt_lo = opt_hi = lo
            break
        if seg_slope == 0.0:
            if opt_lo is None:
                opt_lo = lo
            opt_hi = hi
        lo = hi
    if opt_lo is None:
        raise Unbounded("objective decreases without bound as gamma grows")
    if math.isinf(opt_hi):
        opt_hi = max(opt_lo, 0.0)

    # smallest |gamma| within the optimal interval
    gamma = min(max(0.0, opt_lo), opt_hi)
    beta = float(np.max(u + s * gamma))
    # nudge beta up a few ulps so re-multiplied constraints cannot round negative
    for _ in range(4):
        beta = math.nextafter(beta, math.inf)
    return beta, float(gamma)


def verify_qib(sys, beta, gamma, region=None, plan=None):
    """Evaluate the inner-bound inequality on all sampled pairs.

    Counts violations and reports the worst signed slack
    beta*||dx||^2 + gamma*<dx,dPhi> - ||dPhi||^2 (negative = violated).
    """
    plan = plan or SamplePlan()
    _, data = _collect(sys, region, plan)
    slack = beta * data.a + gamma * data.b - data.c
    tol = 1e-12 * (abs(beta) * data.a + abs(gamma) * np.abs(data.b) + data.c + 1.0)
    bad = slack < -tol
    worst = int(np.argmin(slack))
    return QibReport(
        violations=int(np.count_nonzero(bad)),
        worst_slack=float(slack[worst]),
        worst_pair=(data.x1[worst].copy(), data.x2[worst].copy()),
        checked=int(len(slack)),
    )


def qib_region_radius(beta, gamma):
    """Ball radius on which a cubic-type nonlinearity satisfies the inner
    bound for (beta, gamma): min(sqrt(-gamma/4), (beta + gamma^2/4)^(1/4)).

    Specific to the cubic family of the builtin limit-cycle example; not a
    general-purpose bound.
    """
    if not (gamma < 0.0):
        raise PreconditionViolated("requires gamma < 0")
    disc = beta + gamma * gamma / 4.0
    if not (disc > 0.0):
        raise PreconditionViolated("requires beta + gamma^2/4 > 0")
    return min(math.sqrt(-gamma / 4.0), disc**0.25)


def implied_lipschitz_bound(rho, beta, gamma, alpha=None):
    """Tightest Lipschitz constant implied by (rho, beta, gamma), or None.

    gamma = 0 with beta > 0 gives sqrt(beta); gamma > 0 with beta+gamma*rho > 0
    gives sqrt(beta + gamma*rho); an alpha in (0, 1] with gamma + 2 alpha > 0
    gives (1/alpha)(1 + sqrt((beta+1) + (gamma+2 alpha) rho)). Defaults to
    alpha = 1 when no alpha is supplied.
    """
    candidates = []
    if gamma == 0.0 and beta > 0.0:
        candidates.append(math.sqrt(beta))
    if gamma > 0.0 and beta + gamma * rho > 0.0:
        candidates.append(math.sqrt(beta + gamma * rho))
    a = 1.0 if alpha is None else alpha
    if 0.0 < a <= 1.0 and gamma + 2.0 * a > 0.0:
        radicand = (beta + 1.0) + (gamma + 2.0 * a) * rho
        if radicand >= 0.0:
            candidates.append((1.0 + math.sqrt(radicand)) / a)
    return min(candidates) if candidates else None


def estimate_regularity(sys, region=None, plan=None, alpha=1.0):
    """One-pass estimate of (rho, lip, beta, gamma) from shared samples."""
    plan = plan or SamplePlan()
    region, data = _collect(sys, region, plan)
    lip_w = _lip_from(data)
    osl_w = _osl_from(data)
    try:
        beta, gamma = _qib_lp(data.a, data.b, data.c, alpha, osl_w.value)
    except Unbounded:
        beta = gamma = None
    return RegularityEstimate(
        rho=osl_w.value,
        lip=lip_w.value,
        beta=beta,
        gamma=gamma,
        region=region,
        witnesses={"lipschitz": lip_w, "one_sided": osl_w},
        method=f"{plan.mode} sampling, {len(data.a)} pairs, "
        f"{len(data.jac_points)} jacobian points",
    )
