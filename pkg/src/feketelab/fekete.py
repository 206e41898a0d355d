"""Section bases on model compacts and Fekete configuration search.

Domains are the model compacts with explicit polynomial/harmonic section
spaces: the interval with Chebyshev polynomials, the circle with the
trigonometric basis, the 2-sphere with real spherical harmonics, plus arcs
and caps inheriting the ambient basis.  The weighted log-Vandermonde value
of a configuration is evaluated by pivoted factorization in log space, and
configurations are searched by greedy Leja extraction followed by
single-point exchange refinement over a candidate shortlist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError, InsufficientMeshError

NEG_INF = float("-inf")

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
_SHORTLIST = 64


# ------------------------------------------------------------------ domains
@dataclass(frozen=True)
class Interval:
    """K = [-1, 1]."""

    kind: str = field(default="interval", init=False)

    def mesh(self, size: int = 4000) -> np.ndarray:
        # Chebyshev-Lobatto distribution: clusters where Fekete points do
        j = np.arange(size)
        return np.sort(np.cos(math.pi * j / (size - 1)))

    def contains(self, pts: np.ndarray) -> bool:
        return bool(np.all(np.abs(pts) <= 1.0 + 1e-14))


@dataclass(frozen=True)
class Circle:
    """K = S^1, points stored as angles in [-pi, pi)."""

    kind: str = field(default="circle", init=False)

    def mesh(self, size: int = 4096) -> np.ndarray:
        return 2.0 * math.pi * np.arange(size) / size - math.pi

    def contains(self, pts: np.ndarray) -> bool:
        return bool(np.all(np.abs(pts) <= math.pi + 1e-14))


@dataclass(frozen=True)
class Sphere:
    """K = S^2, points stored as unit vectors in R^3."""

    kind: str = field(default="sphere", init=False)

    def mesh(self, size: int = 40000) -> np.ndarray:
        i = np.arange(size)
        z = 1.0 - (2.0 * i + 1.0) / size
        phi = _GOLDEN_ANGLE * i
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])

    def contains(self, pts: np.ndarray) -> bool:
        return bool(np.all(np.abs(np.linalg.norm(pts, axis=-1) - 1.0) <= 1e-14))


@dataclass(frozen=True)
class CircleArc:
    """Arc {theta_a <= theta <= theta_b} of S^1, inheriting the trig basis."""

    theta_a: float
    theta_b: float
    kind: str = field(default="arc", init=False)

    def __post_init__(self):
        if not self.theta_a < self.theta_b:
            raise InputError("arc needs theta_a < theta_b (positive measure)")

    def mesh(self, size: int = 4096) -> np.ndarray:
        full = Circle().mesh(size)
        return full[(full >= self.theta_a) & (full <= self.theta_b)]

    def contains(self, pts: np.ndarray) -> bool:
        return bool(
            np.all((pts >= self.theta_a - 1e-14) & (pts <= self.theta_b + 1e-14))
        )


@dataclass(frozen=True)
class SphericalCap:
    """Cap {x . axis >= cos(angle)} of S^2."""

    axis: tuple
    angle: float
    kind: str = field(default="cap", init=False)

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        if a.shape != (3,) or not 0.0 < self.angle <= math.pi:
            raise InputError("cap needs a 3-vector axis and angle in (0, pi]")
        object.__setattr__(self, "axis", tuple(a / np.linalg.norm(a)))

    def mesh(self, size: int = 40000) -> np.ndarray:
        full = Sphere().mesh(size)
        keep = full @ np.asarray(self.axis) >= math.cos(self.angle) - 1e-14
        return full[keep]

    def contains(self, pts: np.ndarray) -> bool:
        return bool(
            np.all(pts @ np.asarray(self.axis) >= math.cos(self.angle) - 1e-12)
        )


def ambient_of(domain):
    if isinstance(domain, CircleArc):
        return Circle()
    if isinstance(domain, SphericalCap):
        return Sphere()
    return domain


# ------------------------------------------------------------------- weight
@dataclass(frozen=True)
class Weight:
    """Continuous weight phi with a declared Hoelder (alpha, constant)."""

    phi: object
    alpha: float = 1.0
    constant: float = 0.0
    name: str = "phi"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InputError("declared Hoelder exponent must lie in (0, 1]")

    def values(self, pts: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.phi(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise InputError("weight must be finite on the mesh")
        return vals


def zero_weight() -> Weight:
    return Weight(phi=lambda pts: np.zeros(len(np.atleast_1d(pts))), name="zero")


# -------------------------------------------------------------------- basis
@dataclass(frozen=True)
class BasisSpec:
    """Section basis of degree k on a domain; dim follows the domain rule."""

    domain: object
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise InputError("degree must be nonnegative")


def _chebyshev_matrix(x: np.ndarray, k: int) -> np.ndarray:
    out = np.empty((k + 1, len(x)))
    out[0] = 1.0
    if k >= 1:
        out[1] = x
    for j in range(2, k + 1):
        out[j] = 2.0 * x * out[j - 1] - out[j - 2]
    return out


def _trig_matrix(theta: np.ndarray, k: int) -> np.ndarray:
    rows = [np.ones_like(theta)]
    for j in range(1, k + 1):
        rows.append(np.cos(j * theta))
        rows.append(np.sin(j * theta))
    return np.stack(rows)


def _legendre_norm_matrix(ct: np.ndarray, k: int) -> dict:
    """Fully normalized associated Legendre values P~_l^m(ct), no
    Condon-Shortley sign, normalized so Y integrates to 1 on the sphere."""
    st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
    p = {}
    p[(0, 0)] = np.full_like(ct, math.sqrt(1.0 / (4.0 * math.pi)))
    for m in range(1, k + 1):
        p[(m, m)] = math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * st * p[(m - 1, m - 1)]
    for m in range(0, k):
        p[(m + 1, m)] = math.sqrt(2.0 * m + 3.0) * ct * p[(m, m)]
    for m in range(0, k + 1):
        for l in range(m + 2, k + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            p[(l, m)] = a * (ct * p[(l - 1, m)] - b * p[(l - 2, m)])
    return p


def _sphere_matrix(pts: np.ndarray, k: int) -> np.ndarray:
    """Real orthonormal spherical harmonics l <= k at unit vectors."""
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    phi = np.arctan2(y, x)
    p = _legendre_norm_matrix(z, k)
    rows = []
    sqrt2 = math.sqrt(2.0)
    for l in range(k + 1):
        rows.append(p[(l, 0)])
        for m in range(1, l + 1):
            rows.append(sqrt2 * p[(l, m)] * np.cos(m * phi))
            rows.append(sqrt2 * p[(l, m)] * np.sin(m * phi))
    return np.stack(rows)


def _ambient_matrix(domain, pts: np.ndarray, k: int) -> np.ndarray:
    amb = ambient_of(domain)
    if isinstance(amb, Interval):
        return _chebyshev_matrix(pts, k)
    if isinstance(amb, Circle):
        return _trig_matrix(pts, k)
    if isinstance(amb, Sphere):
        return _sphere_matrix(pts, k)
    raise InputError(f"unknown domain {domain!r}")


def basis_dim(spec: BasisSpec) -> int:
    """N_k: closed-form on full model domains, numerical rank on arcs/caps."""
    domain, k = spec.domain, spec.k
    if isinstance(domain, Interval):
        return k + 1
    if isinstance(domain, Circle):
        return 2 * k + 1
    if isinstance(domain, Sphere):
        return (k + 1) ** 2
    mesh = domain.mesh()
    mat = _ambient_matrix(domain, mesh, k)
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv > 1e-10 * sv[0]))


def eval_basis(spec: BasisSpec, point) -> np.ndarray:
    """Basis vector (s_1(p), ..., s_N(p)) at a single domain point."""
    domain = spec.domain
    pts = np.atleast_2d(point) if isinstance(ambient_of(domain), Sphere) else np.atleast_1d(point)
    if not domain.contains(pts):
        raise DomainError(f"point {point!r} is off the domain {domain.kind}")
    vec = _ambient_matrix(domain, pts, spec.k)[:, 0]
    if not np.all(np.isfinite(vec)):
        raise DomainError("basis evaluation overflowed")
    return vec


def basis_matrix(spec: BasisSpec, pts: np.ndarray) -> np.ndarray:
    """Matrix [s_i(p_j)] for many points at once."""
    return _ambient_matrix(spec.domain, pts, spec.k)


# ------------------------------------------------------------ configurations
@dataclass(frozen=True)
class PointConfiguration:
    """N_k pairwise distinct domain points with their weighted logdet."""

    domain: object
    points: np.ndarray
    logdet: float
    weight: Weight

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if len(pts) >= 2:
            flat = pts.reshape(len(pts), -1)
            d2 = np.sum((flat[:, None, :] - flat[None, :, :]) ** 2, axis=-1)
            np.fill_diagonal(d2, np.inf)
            if np.min(d2) <= 0.0:
                raise InputError("configuration points must be pairwise distinct")

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform atomic probability measure (1/N) sum of point masses."""

    domain: object
    atoms: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.atoms), 1.0 / len(self.atoms))

    def pair(self, v) -> float:
        """Integral of a callable test function against the measure."""
        vals = np.asarray([v(p) for p in self.atoms], dtype=float)
        return float(np.mean(vals))


def fekete_measure(config: PointConfiguration) -> EmpiricalMeasure:
    return EmpiricalMeasure(domain=config.domain, atoms=config.points)


# ----------------------------------------------------------- log determinant
def _weighted_matrix(spec: BasisSpec, weight: Weight, pts: np.ndarray) -> np.ndarray:
    mat = basis_matrix(spec, pts)
    w = np.exp(-spec.k * weight.values(pts))
    return mat * w[None, :]


def log_vandermonde(config, spec: BasisSpec, weight: Weight | None = None) -> float:
    """log |det[s_i(p_j)]| - k sum phi(p_j), or -inf if numerically singular.

    Computed by row-pivoted LU in log space (sign discarded), never by a
    dense determinant.
    """
    weight = zero_weight() if weight is None else weight
    pts = config.points if isinstance(config, PointConfiguration) else np.asarray(config)
    n = basis_dim(spec)
    if len(pts) != n:
        raise InputError(f"need exactly N_k = {n} points, got {len(pts)}")
    a = _weighted_matrix(spec, weight, pts)
    sign, logdet = np.linalg.slogdet(a)
    if sign == 0.0 or not np.isfinite(logdet):
        return NEG_INF
    return float(logdet)


# -------------------------------------------------------------------- greedy
def _greedy_core(w_mat: np.ndarray, n: int, block: int = 32):
    """Row-residual greedy on the mesh-by-basis matrix; returns indices and
    per-step top-shortlist candidates.

    Residual norms are tracked incrementally and the rank-1 deflations are
    applied to the big matrix in blocks (compact-WY style), so the cost is
    one matvec per step plus occasional GEMMs.
    """
    r = w_mat.copy()
    mesh_sz, nb = r.shape
    chosen = []
    shortlists = []
    scores2 = np.einsum("ij,ij->i", r, r)
    scale0 = math.sqrt(float(np.max(scores2)))
    v_pend = np.empty((block, nb))
    c_pend = np.empty((mesh_sz, block))
    pending = 0

    def flush():
        nonlocal pending
        if pending:
            r_local = r
            r_local -= c_pend[:, :pending] @ v_pend[:pending]
            pending = 0

    for _ in range(n):
        pick = int(np.argmax(scores2))
        if scores2[pick] <= (1e-12 * scale0) ** 2 + 1e-14 * scale0**2:
            flush()
            scores2 = np.einsum("ij,ij->i", r, r)
            pick = int(np.argmax(scores2))
            if scores2[pick] <= (1e-12 * scale0) ** 2:
                raise InsufficientMeshError(
                    "mesh cannot resolve the basis (rank < N_k)"
                )
        top = np.argpartition(-scores2, min(_SHORTLIST, mesh_sz - 1))[:_SHORTLIST]
        top = top[np.lexsort((top, -scores2[top]))]
        shortlists.append(top)
        chosen.append(pick)
        row = r[pick] - c_pend[pick, :pending] @ v_pend[:pending]
        nv = math.sqrt(max(float(scores2[pick]), 0.0))
        v = row / nv
        c = r @ v - c_pend[:, :pending] @ (v_pend[:pending] @ v)
        v_pend[pending] = v
        c_pend[:, pending] = c
        pending += 1
        scores2 -= c * c
        np.maximum(scores2, 0.0, out=scores2)
        if pending == block:
            flush()
    return chosen, shortlists


def leja_greedy(
    spec: BasisSpec, weight: Weight, mesh: np.ndarray
) -> tuple[PointConfiguration, list]:
    """Greedy Leja extraction of N_k mesh points; also returns per-point
    candidate shortlists (the best residual nodes seen at each step)."""
    n = basis_dim(spec)
    if len(mesh) < 5 * n:
        raise InsufficientMeshError(f"mesh must have at least 5 N_k = {5 * n} nodes")
    w_mat = _weighted_matrix(spec, weight, mesh).T  # mesh x basis
    chosen, shortlists = _greedy_core(w_mat, n)
    pts = mesh[chosen]
    cfg = PointConfiguration(
        domain=spec.domain,
        points=pts,
        logdet=log_vandermonde(pts, spec, weight),
        weight=weight,
    )
    return cfg, [mesh[s] for s in shortlists]


def _config_shortlists(spec, weight, mesh, config):
    """Greedy residual shortlists with the configuration itself as the
    greedy sequence (used when no greedy history is supplied)."""
    w_mat = _weighted_matrix(spec, weight, mesh).T
    cfg_mat = _weighted_matrix(spec, weight, config.points).T
    shortlists = []
    r = w_mat.copy()
    rc = cfg_mat.copy()
    for i in range(config.size):
        scores = np.linalg.norm(r, axis=1)
        shortlists.append(mesh[np.argsort(-scores, kind="stable")[:_SHORTLIST]])
        nv = np.linalg.norm(rc[i])
        if nv <= 0.0:
            continue
        v = rc[i] / nv
        r -= np.outer(r @ v, v)
        rc -= np.outer(rc @ v, v)
    return shortlists


_LOCAL_WINDOW = 32


def _local_candidates(domain, mesh: np.ndarray, point) -> np.ndarray:
    """Mesh nodes around the current point, for fine positional moves."""
    amb = ambient_of(domain)
    if isinstance(amb, Sphere):
        dots = mesh @ np.asarray(point)
        take = min(2 * _LOCAL_WINDOW + 1, len(mesh))
        idx = np.argpartition(-dots, take - 1)[:take]
        return mesh[np.sort(idx)]
    idx = int(np.searchsorted(mesh, float(point)))
    if isinstance(amb, Circle) and isinstance(domain, Circle):
        offs = np.arange(idx - _LOCAL_WINDOW, idx + _LOCAL_WINDOW + 1) % len(mesh)
        return mesh[offs]
    lo = max(0, idx - _LOCAL_WINDOW)
    hi = min(len(mesh), idx + _LOCAL_WINDOW + 1)
    return mesh[lo:hi]


def exchange_refine(
    config: PointConfiguration,
    spec: BasisSpec,
    weight: Weight,
    mesh: np.ndarray,
    sweeps: int = 3,
    shortlists: list | None = None,
) -> PointConfiguration:
    """Single-point exchange; accepts a move only when the weighted logdet
    strictly increases, so logdet is monotone.

    Candidates per point: the greedy-residual shortlist plus a window of
    mesh nodes around the point's current position (the shortlist alone
    cannot settle configurations to mesh resolution).
    """
    if shortlists is None:
        shortlists = _config_shortlists(spec, weight, mesh, config)
    pts = np.array(config.points, copy=True)
    n = config.size

    def full_matrix(p):
        return _weighted_matrix(spec, weight, p)

    a = full_matrix(pts)
    inv_a = np.linalg.inv(a)
    for _ in range(sweeps):
        improved = False
        for i in range(n):
            cands = np.concatenate(
                [shortlists[i], _local_candidates(config.domain, mesh, pts[i])]
            )
            b = full_matrix(cands)  # basis x n_cand
            # det ratio for swapping column i of A to b_c is (A^-1 b_c)_i
            ratios = inv_a @ b
            gains = np.abs(ratios[i, :])
            j = int(np.argmax(gains))
            if gains[j] > 1.0 + 1e-10:
                cand = cands[j]
                # candidate must not duplicate another current point
                others = np.delete(np.arange(n), i)
                flat = pts[others].reshape(n - 1, -1)
                cf = np.asarray(cand, dtype=float).reshape(1, -1)
                if np.min(np.sum((flat - cf) ** 2, axis=-1)) <= 0.0:
                    continue
                pts[i] = cand
                a = full_matrix(pts)
                inv_a = np.linalg.inv(a)
                improved = True
        if not improved:
            break
    return PointConfiguration(
        domain=config.domain,
        points=pts,
        logdet=log_vandermonde(pts, spec, weight),
        weight=weight,
    )
