"""System class dx/dt = A x + Phi(x, u), y = C x, with polynomial or
registered-builtin nonlinearities, analytic Jacobians, and JSON ingestion.

All regularity constants produced elsewhere in the package are asserted
uniformly in u: u is a caller-supplied signal, never part of the bounds.
Instances are immutable after construction and safe to share across threads.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NotDifferentiableAtPoint,
    ParseError,
    SchemaError,
    UnknownBuiltin,
)
from .linalg import as_matrix


@dataclass(frozen=True)
class PolyTerm:
    """One monomial: coef * prod_j x_j^exps[j], optionally times u[u_index]."""

    out: int
    coef: float
    exps: tuple
    u_index: int = None


@dataclass(frozen=True)
class Nonlinearity:
    kind: str  # "polynomial" | "builtin"
    name: str = None
    terms: tuple = None


@dataclass(frozen=True)
class Region:
    """Operational region: origin-centered ball or axis-aligned box."""

    shape: str  # "ball" | "box"
    dim: int
    r: float = None
    lower: tuple = None
    upper: tuple = None

    @staticmethod
    def ball(r, dim):
        if not (r > 0):
            raise DimensionMismatch(f"ball radius must be positive, got {r}")
        return Region(shape="ball", dim=int(dim), r=float(r))

    @staticmethod
    def box(lower, upper):
        lo = tuple(float(v) for v in lower)
        up = tuple(float(v) for v in upper)
        if len(lo) != len(up) or not lo:
            raise DimensionMismatch("box bounds must have equal, positive length")
        if not all(a < b for a, b in zip(lo, up)):
            raise DimensionMismatch("box requires lower < upper componentwise")
        return Region(shape="box", dim=len(lo), lower=lo, upper=up)

    def center(self):
        if self.shape == "ball":
            return np.zeros(self.dim)
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    def scale(self):
        """Characteristic half-width, used to scale pair separations."""
        if self.shape == "ball":
            return self.r
        return 0.5 * float(np.max(np.asarray(self.upper) - np.asarray(self.lower)))

    def contains(self, x, rtol=1e-12):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"point has shape {x.shape}, region dim {self.dim}")
        if self.shape == "ball":
            return float(np.linalg.norm(x)) <= self.r * (1.0 + rtol)
        lo = np.asarray(self.lower)
        up = np.asarray(self.upper)
        pad = rtol * np.maximum(1.0, np.abs(lo) + np.abs(up))
        return bool(np.all(x >= lo - pad) and np.all(x <= up + pad))

    def clip(self, x):
        """Nearest point of the region (ball: radial projection; box: clamp)."""
        x = np.asarray(x, dtype=float)
        if self.shape == "ball":
            nrm = float(np.linalg.norm(x))
            if nrm > self.r and nrm > 0.0:
                return x * (self.r / nrm)
            return x
        return np.clip(x, np.asarray(self.lower), np.asarray(self.upper))


def region_contains(outer, inner):
    """True when `inner` is a subset of `outer` (ball/box combinations)."""
    if inner.dim != outer.dim:
        return False
    if outer.shape == "ball" and inner.shape == "ball":
        return inner.r <= outer.r * (1.0 + 1e-12)
    if outer.shape == "box" and inner.shape == "box":
        return all(a >= b for a, b in zip(inner.lower, outer.lower)) and all(
            a <= b for a, b in zip(inner.upper, outer.upper)
        )
    if outer.shape == "ball" and inner.shape == "box":
        corners = _box_corners(inner)
        return all(float(np.linalg.norm(c)) <= outer.r * (1.0 + 1e-12) for c in corners)
    # box contains ball: the ball is origin-centered with radius r
    lo = np.asarray(outer.lower)
    up = np.asarray(outer.upper)
    return bool(np.all(lo <= -inner.r) and np.all(up >= inner.r))


def _box_corners(region, cap=64):
    lo = np.asarray(region.lower)
    up = np.asarray(region.upper)
    n = region.dim
    if 2**n > cap:
        corners = [lo, up]
    else:
        corners = []
        for mask in range(2**n):
            corners.append(np.where([(mask >> i) & 1 for i in range(n)], up, lo))
    return np.asarray(corners, dtype=float)


@dataclass(frozen=True, eq=False)
class DynamicalSystem:
    """dx/dt = A x + Phi(x, u), y = C x on a stated operational region."""

    A: np.ndarray
    C: np.ndarray
    phi: Nonlinearity
    region: Region
    input_dim: int = 0

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        c = as_matrix(self.C, "C")
        n = a.shape[0]
        if a.shape[1] != n:
            raise DimensionMismatch(f"A must be square, got {a.shape}")
        if c.shape[1] != n:
            raise DimensionMismatch(f"C has {c.shape[1]} columns, expected {n}")
        if self.region.dim != n:
            raise DimensionMismatch(f"region dim {self.region.dim} != state dim {n}")
        _validate_phi(self.phi, n, self.input_dim)
        a.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "C", c)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.C.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DynamicalSystem):
            return NotImplemented
        return (
            np.array_equal(self.A, other.A)
            and np.array_equal(self.C, other.C)
            and self.phi == other.phi
            and self.region == other.region
            and self.input_dim == other.input_dim
        )

    def phi_term_arrays(self):
        """(outs, coefs, exps) int64/float64 arrays for polynomial kind, else None.

        Only offered for autonomous polynomial terms (no u factors); the
        fixed-step kernels integrate exactly this structure.
        """
        if self.phi.kind != "polynomial":
            return None
        if any(t.u_index is not None for t in self.phi.terms):
            return None
        outs = np.array([t.out for t in self.phi.terms], dtype=np.int64)
        coefs = np.array([t.coef for t in self.phi.terms], dtype=float)
        if self.phi.terms:
            exps = np.array([t.exps for t in self.phi.terms], dtype=np.int64)
        else:
            exps = np.zeros((0, self.n), dtype=np.int64)
        return outs, coefs, exps


def _validate_phi(phi, n, input_dim):
    if phi.kind == "polynomial":
        if phi.terms is None:
            raise DimensionMismatch("polynomial nonlinearity requires terms")
        for t in phi.terms:
            if len(t.exps) != n:
                raise DimensionMismatch(
                    f"term exponent vector has length {len(t.exps)}, expected {n}"
                )
            if any((e < 0 or int(e) != e) for e in t.exps):
                raise DimensionMismatch("exponents must be nonnegative integers")
            if not (0 <= t.out < n):
                raise DimensionMismatch(f"term output index {t.out} out of range")
            if t.u_index is not None and not (0 <= t.u_index < input_dim):
                raise DimensionMismatch(f"term input index {t.u_index} out of range")
    elif phi.kind == "builtin":
        if phi.name not in _BUILTIN_PHI:
            raise UnknownBuiltin(f"no builtin nonlinearity named {phi.name!r}")
    else:
        raise DimensionMismatch(f"unknown nonlinearity kind {phi.kind!r}")


# --- evaluation ---------------------------------------------------------

def eval_phi(sys, x, u=None):
    """Phi(x, u) as a length-n vector."""
    x = _check_state(sys, x)
    u = _check_input(sys, u)
    if sys.phi.kind == "builtin":
        return _BUILTIN_PHI[sys.phi.name].phi(x.reshape(1, -1))[0]
    out = np.zeros(sys.n)
    for t in sys.phi.terms:
        v = t.coef
        for j, e in enumerate(t.exps):
            if e:
                v *= x[j] ** e
        if t.u_index is not None:
            v *= u[t.u_index]
        out[t.out] += v
    return out


def eval_phi_batch(sys, pts, u=None):
    """Phi at rows of an (N, n) array; vectorized."""
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != sys.n:
        raise DimensionMismatch(f"points must be (N, {sys.n}), got {pts.shape}")
    u = _check_input(sys, u)
    if sys.phi.kind == "builtin":
        return _BUILTIN_PHI[sys.phi.name].phi(pts)
    out = np.zeros_like(pts)
    for t in sys.phi.terms:
        v = np.full(pts.shape[0], t.coef)
        for j, e in enumerate(t.exps):
            if e:
                v = v * pts[:, j] ** e
        if t.u_index is not None:
            v = v * u[t.u_index]
        out[:, t.out] += v
    return out


def jacobian(sys, x, u=None):
    """dPhi/dx at x: analytic for polynomials and builtins that declare one,
    central finite differences (step 1e-6 * max(1, ||x||)) otherwise."""
    x = _check_state(sys, x)
    u = _check_input(sys, u)
    if sys.phi.kind == "builtin":
        entry = _BUILTIN_PHI[sys.phi.name]
        if entry.jac is not None:
            return entry.jac(x)
        return _fd_jacobian(lambda p: entry.phi(p.reshape(1, -1))[0], x)
    jac = np.zeros((sys.n, sys.n))
    for t in sys.phi.terms:
        base = t.coef if t.u_index is None else t.coef * u[t.u_index]
        for j, ej in enumerate(t.exps):
            if ej == 0:
                continue
            v = base * ej
            for i, ei in enumerate(t.exps):
                k = ei - 1 if i == j else ei
                if k:
                    v *= x[i] ** k
            jac[t.out, j] += v
    return jac


def _fd_jacobian(f, x):
    n = x.size
    h = 1e-6 * max(1.0, float(np.linalg.norm(x)))
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        jac[:, j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return jac


def _check_state(sys, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (sys.n,):
        raise DimensionMismatch(f"state has length {x.size}, expected {sys.n}")
    return x


def _check_input(sys, u):
    if sys.input_dim == 0:
        return np.zeros(0)
    if u is None:
        raise DimensionMismatch(f"system expects an input of length {sys.input_dim}")
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (sys.input_dim,):
        raise DimensionMismatch(f"input has length {u.size}, expected {sys.input_dim}")
    return u


# --- builtin registry ---------------------------------------------------

@dataclass(frozen=True)
class _BuiltinPhi:
    phi: callable  # (N, n) -> (N, n)
    jac: callable = None  # (n,) -> (n, n), may raise NotDifferentiableAtPoint


_BUILTIN_PHI = {}
_BUILTIN_SYSTEMS = {}


def register_builtin(name, factory, phi=None, jac=None):
    """Register a named system factory and, optionally, a non-polynomial
    nonlinearity with a vectorized evaluator and analytic Jacobian."""
    _BUILTIN_SYSTEMS[name] = factory
    if phi is not None:
        _BUILTIN_PHI[name] = _BuiltinPhi(phi=phi, jac=jac)


def builtin(name, radius=None):
    """Instantiate a registered example system.

    `radius` overrides the default operational region half-width
    (ball radius, or box half-width for interval regions).
    """
    try:
        factory = _BUILTIN_SYSTEMS[name]
    except KeyError:
        raise UnknownBuiltin(f"no builtin system named {name!r}") from None
    return factory(radius)


def _make_cubic_decay(radius):
    r = 2.0 if radius is None else float(radius)
    return DynamicalSystem(
        A=np.zeros((1, 1)),
        C=np.ones((1, 1)),
        phi=Nonlinearity(kind="polynomial", terms=(PolyTerm(0, -1.0, (3,)),)),
        region=Region.ball(r, 1),
    )


def _signed_sqrt(pts):
    x = pts[:, 0]
    return (-np.sign(x) * np.sqrt(np.abs(x))).reshape(-1, 1)


def _signed_sqrt_jac(x):
    v = float(x[0])
    if v == 0.0:
        raise NotDifferentiableAtPoint("signed square root has no Jacobian at 0")
    return np.array([[-0.5 / np.sqrt(abs(v))]])


def _make_signed_sqrt(radius):
    m = 1.0 if radius is None else float(radius)
    return DynamicalSystem(
        A=np.zeros((1, 1)),
        C=np.ones((1, 1)),
        phi=Nonlinearity(kind="builtin", name="example2"),
        region=Region.box((-m,), (m,)),
    )


def _make_limit_cycle(radius):
    r = 5.9372 if radius is None else float(radius)
    terms = (
        PolyTerm(0, -1.0, (3, 0)),
        PolyTerm(0, -1.0, (1, 2)),
        PolyTerm(1, -1.0, (2, 1)),
        PolyTerm(1, -1.0, (0, 3)),
    )
    return DynamicalSystem(
        A=np.array([[1.0, -1.0], [1.0, 1.0]]),
        C=np.array([[0.0, 1.0]]),
        phi=Nonlinearity(kind="polynomial", terms=terms),
        region=Region.ball(r, 2),
    )


register_builtin("example1", _make_cubic_decay)
register_builtin("example2", _make_signed_sqrt, phi=_signed_sqrt, jac=_signed_sqrt_jac)
register_builtin("example3", _make_limit_cycle)


# --- JSON ingestion -----------------------------------------------------

def serialize_system(sys):
    """Schema dict; `json.dumps(serialize_system(s))` round-trips through
    `parse_system`."""
    phi = {"kind": sys.phi.kind}
    if sys.phi.kind == "builtin":
        phi["name"] = sys.phi.name
    else:
        terms = []
        for t in sys.phi.terms:
            d = {"out": t.out, "coef": t.coef, "exps": [int(e) for e in t.exps]}
            if t.u_index is not None:
                d["u"] = t.u_index
            terms.append(d)
        phi["terms"] = terms
    if sys.region.shape == "ball":
        region = {"shape": "ball", "r": sys.region.r}
    else:
        region = {
            "shape": "box",
            "lower": list(sys.region.lower),
            "upper": list(sys.region.upper),
        }
    return {
        "n": sys.n,
        "p": sys.p,
        "m": sys.input_dim,
        "A": sys.A.tolist(),
        "C": sys.C.tolist(),
        "phi": phi,
        "region": region,
    }


def _want(obj, key, types, path):
    if key not in obj:
        raise SchemaError(f"{path}{key}" if path else key, f"missing required key {key!r}")
    val = obj[key]
    if types is not None and not isinstance(val, types):
        raise SchemaError(f"{path}{key}" if path else key, f"wrong type for {key!r}")
    return val


def _as_real_matrix(val, path):
    if not (isinstance(val, list) and val and all(isinstance(r, list) for r in val)):
        raise SchemaError(path, "expected a list of rows")
    width = len(val[0])
    for i, row in enumerate(val):
        if len(row) != width:
            raise DimensionMismatch(f"{path}[{i}] has length {len(row)}, expected {width}")
        for j, v in enumerate(row):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise SchemaError(f"{path}[{i}][{j}]", "expected a real number")
    return np.asarray(val, dtype=float)


def parse_system(json_text):
    """Build a validated system from schema JSON text."""
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("", "top level must be an object")

    n = _want(obj, "n", int, "")
    p = _want(obj, "p", int, "")
    m = _want(obj, "m", int, "")
    if n <= 0 or p <= 0 or m < 0:
        raise SchemaError("n", "require n > 0, p > 0, m >= 0")
    a = _as_real_matrix(_want(obj, "A", list, ""), "A")
    c = _as_real_matrix(_want(obj, "C", list, ""), "C")
    if a.shape != (n, n):
        raise DimensionMismatch(f"A is {a.shape}, expected ({n}, {n})")
    if c.shape != (p, n):
        raise DimensionMismatch(f"C is {c.shape}, expected ({p}, {n})")

    phi_obj = _want(obj, "phi", dict, "")
    kind = _want(phi_obj, "kind", str, "phi.")
    if kind == "builtin":
        name = _want(phi_obj, "name", str, "phi.")
        if name not in _BUILTIN_PHI:
            raise UnknownBuiltin(f"no builtin nonlinearity named {name!r}")
        phi = Nonlinearity(kind="builtin", name=name)
    elif kind == "polynomial":
        raw_terms = _want(phi_obj, "terms", list, "phi.")
        terms = []
        for i, t in enumerate(raw_terms):
            path = f"phi.terms[{i}]."
            if not isinstance(t, dict):
                raise SchemaError(f"phi.terms[{i}]", "term must be an object")
            out = _want(t, "out", int, path)
            coef = _want(t, "coef", (int, float), path)
            exps = _want(t, "exps", list, path)
            if not all(isinstance(e, int) and not isinstance(e, bool) for e in exps):
                raise SchemaError(f"{path}exps", "exponents must be integers")
            u_index = t.get("u")
            if u_index is not None and not isinstance(u_index, int):
                raise SchemaError(f"{path}u", "input index must be an integer")
            terms.append(PolyTerm(out=out, coef=float(coef), exps=tuple(exps), u_index=u_index))
        phi = Nonlinearity(kind="polynomial", terms=tuple(terms))
    else:
        raise SchemaError("phi.kind", f"unknown kind {kind!r}")

    region_obj = _want(obj, "region", dict, "")
    shape = _want(region_obj, "shape", str, "region.")
    if shape == "ball":
        r = _want(region_obj, "r", (int, float), "region.")
        region = Region.ball(float(r), n)
    elif shape == "box":
        lower = _want(region_obj, "lower", list, "region.")
        upper = _want(region_obj, "upper", list, "region.")
        if len(lower) != n or len(upper) != n:
            raise DimensionMismatch(f"region bounds must have length {n}")
        region = Region.box(lower, upper)
    else:
        raise SchemaError("region.shape", f"unknown shape {shape!r}")

    return DynamicalSystem(A=a, C=c, phi=phi, region=region, input_dim=m)
