"""Explicit analytic-disc families and the quantitative capture solver.

Two families live here.  The first, F, is half-attached to R^n: its
boundary trace has imaginary part t*u*(Im z/|z|) built from the back-half
bump with dx u(1) = -1, so the front half-circle maps into R^n and the
point 1 maps to t(Re z - Im z).  The second, F', is attached to (R+)^n on
an arc around 1: its imaginary part combines the dual bumps (u1, u2) with
coefficients chosen so the real part is a nonnegative quadratic plus a
controlled cubic near theta = 0.  F'_tau embeds F' in a larger family
half-attached to R^n, with tau steering the boundary derivative at 1.

Capture solvers invert z -> F(path(z), z, t) by the contraction iteration
z <- A^{-1}(target - g(z)), exactly the constructive inverse behind both
families.  The admissible radii r0, r0' and the attachment arc theta0 are
not taken from any closed formula; they are measured once per grid size by
a deterministic scan and kept in a calibration record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circle import (
    CircleFunction,
    CircleGrid,
    bump_u_minus,
    dual_basis,
    hilbert_T1,
)
from .errors import CaptureFailure, DomainError, InputError, PreconditionError

_NEG_ENERGY_TOL = 1e-10


def _fsum_complex(terms: np.ndarray) -> complex:
    # compensated accumulation; the capture path evaluates near |z| = 1
    # where naive summation of ~M/2 terms loses digits
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


class AnalyticDisc:
    """Holomorphic map of the disc, stored by its boundary traces.

    Each of the n complex traces must carry (numerically) nonnegative
    frequencies only; interior evaluation is the one-sided power sum.
    """

    __slots__ = ("grid", "n", "traces", "coeffs")

    def __init__(self, grid: CircleGrid, traces: np.ndarray, coeffs: np.ndarray):
        self.grid = grid
        self.n = traces.shape[0]
        self.traces = traces
        self.coeffs = coeffs

    @classmethod
    def from_traces(cls, grid: CircleGrid, traces) -> "AnalyticDisc":
        traces = np.asarray(traces, dtype=complex)
        if traces.ndim != 2 or traces.shape[1] != grid.m:
            raise InputError("traces must have shape (n, M)")
        spec = np.fft.fft(traces, axis=1) / grid.m
        # grid starts at -pi: re-phase so bin k multiplies e^{i k theta}
        m = grid.m
        signs = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
        spec = spec * signs
        coeffs = spec[:, : m // 2 + 1].copy()
        disc = cls(grid, traces, coeffs)
        if disc.negative_energy_ratio() > _NEG_ENERGY_TOL:
            raise InputError("boundary traces carry negative-frequency energy")
        return disc

    def negative_energy_ratio(self) -> float:
        """Energy in strictly negative frequencies over total energy."""
        spec = np.fft.fft(self.traces, axis=1) / self.grid.m
        m = self.grid.m
        total = float(np.sum(np.abs(spec) ** 2))
        if total == 0.0:
            return 0.0
        neg = float(np.sum(np.abs(spec[:, m // 2 + 1 :]) ** 2))
        return neg / total

    def eval(self, z: complex) -> np.ndarray:
        """Interior value by the one-sided coefficient sum (compensated)."""
        z = complex(z)
        if abs(z) > 1.0 + 1e-12:
            raise DomainError("analytic disc is defined on the closed unit disc")
        powers = z ** np.arange(self.coeffs.shape[1])
        return np.array(
            [_fsum_complex(self.coeffs[j] * powers) for j in range(self.n)]
        )

    def boundary_value_at_one(self) -> complex | np.ndarray:
        vals = self.traces[:, self.grid.index_of_one]
        return vals[0] if self.n == 1 else vals

    def to_csv_rows(self):
        """Serialization layout: theta, then Re/Im per component."""
        header = ["theta"]
        for j in range(self.n):
            header += [f"re{j}", f"im{j}"]
        rows = [header]
        for i, theta in enumerate(self.grid.nodes):
            row = [f"{theta:.17g}"]
            for j in range(self.n):
                row += [f"{self.traces[j, i].real:.17g}", f"{self.traces[j, i].imag:.17g}"]
            rows.append(row)
        return rows


@dataclass(frozen=True)
class FamilyParams:
    """Parameter point of a disc family: z in a punctured real 2n-ball,
    scale t in (0, 1], optional control tau in B_n(0, 2)."""

    z_re: tuple
    z_im: tuple
    t: float
    tau: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "z_re", tuple(float(x) for x in self.z_re))
        object.__setattr__(self, "z_im", tuple(float(x) for x in self.z_im))
        if len(self.z_re) != len(self.z_im):
            raise InputError("Re z and Im z must have the same length")
        if not 0.0 < self.t <= 1.0:
            raise InputError("t must lie in (0, 1]")
        if self.norm == 0.0:
            raise DomainError("z must be nonzero (punctured ball)")
        if self.tau is not None:
            object.__setattr__(self, "tau", tuple(float(x) for x in self.tau))
            if len(self.tau) != len(self.z_re):
                raise InputError("tau must have length n")
            if math.sqrt(sum(x * x for x in self.tau)) >= 2.0:
                raise DomainError("tau must lie in B_n(0, 2)")

    @property
    def n(self) -> int:
        return len(self.z_re)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(x * x for x in self.z_re) + sum(x * x for x in self.z_im))

    @property
    def z(self) -> np.ndarray:
        return np.asarray(self.z_re) + 1j * np.asarray(self.z_im)

    @classmethod
    def from_complex(cls, z, t: float, tau=None) -> "FamilyParams":
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return cls(tuple(z.real), tuple(z.imag), t, None if tau is None else tuple(tau))


@dataclass(frozen=True)
class InverseProblem:
    """Perturbed-linear inverse problem: find z with Phi0(z) = target.

    Phi0 = A z + g(z) with g Lipschitz of constant lipschitz_g; the
    contraction z <- A^{-1}(target - g(z)) then solves it inside B(0, r).
    """

    phi0: object
    matrix: np.ndarray
    radius: float
    target: np.ndarray
    lipschitz_g: float

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))
        inv_norm = float(np.linalg.norm(np.linalg.inv(a), 2))
        if inv_norm * self.lipschitz_g >= 1.0:
            raise PreconditionError("need |A^-1| * Lip(g) < 1")
        bound = (1.0 - inv_norm * self.lipschitz_g) / inv_norm * self.radius
        if np.linalg.norm(self.target) >= bound:
            raise PreconditionError("target outside the guaranteed ball")


def solve_quantitative_inverse(prob: InverseProblem, tol: float = 1e-10):
    """Contraction iteration from 0; returns (z_star, ratio_log)."""
    a_inv = np.linalg.inv(prob.matrix)
    z = np.zeros_like(prob.target)
    ratios = []
    prev_step = None
    for _ in range(500):
        g = np.asarray(prob.phi0(z)) - prob.matrix @ z
        z_new = a_inv @ (prob.target - g)
        step = float(np.linalg.norm(z_new - z))
        if prev_step is not None and prev_step > 0:
            ratios.append(step / prev_step)
            if len(ratios) >= 3 and min(ratios[-3:]) >= 1.0:
                raise PreconditionError("observed contraction ratio >= 1")
        prev_step = step
        z = z_new
        if np.linalg.norm(np.asarray(prob.phi0(z)) - prob.target) <= tol:
            return z, ratios
    raise CaptureFailure("inverse iteration did not converge in 500 steps")


# ---------------------------------------------------------------- family F
def build_u_zt(p: FamilyParams, grid: CircleGrid) -> list[CircleFunction]:
    """Imaginary-part data of F: component j is t * u * Im z_j / |z|."""
    if p.tau is not None:
        raise InputError("build_u_zt takes parameters without tau")
    u = bump_u_minus(grid)
    s = p.norm
    return [CircleFunction(grid, (p.t * im / s) * u.samples) for im in p.z_im]


def family_F(p: FamilyParams, grid: CircleGrid) -> AnalyticDisc:
    """Disc half-attached to R^n with F(1, z, t) = t(Re z - Im z)."""
    if not 0.0 < p.norm < 1.0:
        raise DomainError("family F needs 0 < |z| < 1")
    comps = build_u_zt(p, grid)
    traces = np.empty((p.n, grid.m), dtype=complex)
    for j, uj in enumerate(comps):
        const = p.t * (p.z_re[j] - p.z_im[j])
        traces[j] = const - hilbert_T1(uj).samples + 1j * uj.samples
    return AnalyticDisc.from_traces(grid, traces)


# --------------------------------------------------------------- family F'
def build_u_delta_gamma(
    z_tilde: complex, delta: float, gamma: float, grid: CircleGrid
) -> CircleFunction:
    """Boundary function with dx u(1) = -2 Im z~/(delta(2+delta)) and
    dxdy u(1) = -2(gamma - Re z~)/delta^2, supported in the back half."""
    if not (gamma >= 2.0 * abs(z_tilde) and 0.5 * math.sqrt(gamma) <= delta <= 2.0 * math.sqrt(gamma)):
        raise DomainError("need gamma >= 2|z~| and sqrt(gamma)/2 <= delta <= 2 sqrt(gamma)")
    u1, u2 = dual_basis(grid)
    c1 = 2.0 * z_tilde.imag / (delta * (2.0 + delta))
    c2 = 2.0 * (gamma - z_tilde.real) / delta**2
    return CircleFunction(grid, -c1 * u1.samples - c2 * u2.samples)


def fprime_coefficients(p: FamilyParams):
    """Per-component (c1, c2) multipliers of (u1, u2) in u'_{z,t}."""
    s = p.norm
    delta, gamma = math.sqrt(s), 2.0 * s
    out = []
    for j in range(p.n):
        c1 = 2.0 * p.z_im[j] / (delta * (2.0 + delta))
        c2 = 2.0 * (gamma - p.z_re[j]) / delta**2
        out.append((p.t * c1, p.t * c2))
    return out


def _u_prime_components(p: FamilyParams, grid: CircleGrid) -> np.ndarray:
    u1, u2 = dual_basis(grid)
    rows = np.empty((p.n, grid.m))
    for j, (c1, c2) in enumerate(fprime_coefficients(p)):
        rows[j] = -c1 * u1.samples - c2 * u2.samples
    if p.tau is not None:
        tilde = 10.0 * u1.samples
        for j in range(p.n):
            rows[j] = rows[j] + p.t * p.tau[j] * tilde
    return rows


def u_prime_boundary(p: FamilyParams, grid: CircleGrid) -> list[CircleFunction]:
    """Imaginary-part data of F' (or F'_tau when tau is present)."""
    if not 0.0 < p.norm < 1.0 / (2.0 * p.n):
        raise DomainError("family F' needs 0 < |z| < 1/(2n)")
    return [CircleFunction(grid, row) for row in _u_prime_components(p, grid)]


def _assemble_prime(p: FamilyParams, grid: CircleGrid) -> AnalyticDisc:
    comps = u_prime_boundary(p, grid)
    traces = np.empty((p.n, grid.m), dtype=complex)
    const = 2.0 * p.t * p.norm
    for j, uj in enumerate(comps):
        traces[j] = const - hilbert_T1(uj).samples + 1j * uj.samples
    return AnalyticDisc.from_traces(grid, traces)


def family_Fprime(p: FamilyParams, grid: CircleGrid) -> AnalyticDisc:
    """Disc attached to (R+)^n on the calibrated arc, F'(1,z,t) = 2t(|z|,...)."""
    if p.tau is not None:
        raise InputError("family_Fprime takes parameters without tau; see family_Fprime_tau")
    return _assemble_prime(p, grid)


def family_Fprime_tau(p: FamilyParams, grid: CircleGrid) -> AnalyticDisc:
    """The tau-augmented family; tau = 0 reproduces family_Fprime exactly."""
    if p.tau is None:
        p = FamilyParams(p.z_re, p.z_im, p.t, tau=(0.0,) * p.n)
    return _assemble_prime(p, grid)


def quadratic_minorant_discriminant(p: FamilyParams) -> float:
    """Discriminant of the quadratic minorant of Re F'_j near theta = 0.

    Nonpositive means the minorant gamma + c1 theta + (c2/2) theta^2 is
    nonnegative for all theta; maximized over components.
    """
    s = p.norm
    delta, gamma = math.sqrt(s), 2.0 * s
    worst = -math.inf
    for j in range(p.n):
        c1 = 2.0 * p.z_im[j] / (delta * (2.0 + delta))
        half_c2 = (gamma - p.z_re[j]) / delta**2
        worst = max(worst, c1 * c1 - 4.0 * gamma * half_c2)
    return worst


# -------------------------------------------------------------- calibration
@dataclass(frozen=True)
class Calibration:
    """Measured constants of the disc families at one grid size.

    r0, r0_prime: capture radii; theta0: attachment arc of F'; c0_sup and
    c0_deriv: sup-norm constants of F per unit t (value, and value of the
    z-gradient times |z|); c0_prime_sup: same for F'.  All obtained from
    deterministic scans, never from the existential constants.
    """

    grid_m: int
    r0: float
    r0_prime: float
    theta0: float
    c0_sup: float
    c0_deriv: float
    c0_prime_sup: float
    g0_norm: float

    def as_dict(self) -> dict:
        return {
            "grid_m": self.grid_m,
            "r0": self.r0,
            "r0_prime": self.r0_prime,
            "theta0": self.theta0,
            "c0_sup": self.c0_sup,
            "c0_deriv": self.c0_deriv,
            "c0_prime_sup": self.c0_prime_sup,
            "g0_norm": self.g0_norm,
        }


def _interior_value(u: CircleFunction, z: complex) -> float:
    powers = z ** np.arange(len(u.a))
    coeff = u.a - 1j * u.b
    coeff[0] = u.a[0]
    return float(np.real(_fsum_complex(coeff * powers)))


def _g0_scan(grid: CircleGrid, s_values):
    """Taylor remainders g1, g2 of u and -T1 u along the capture path."""
    u = bump_u_minus(grid)
    t1u = hilbert_T1(u)
    out = []
    for s in s_values:
        z = 1.0 - s + 1j * s
        g1 = (_interior_value(u, z) - s) / (s * s)
        g2 = (-_interior_value(t1u, z) - s) / (s * s)
        out.append((g1, g2))
    return np.asarray(out)


@lru_cache(maxsize=None)
def calibrate(grid: CircleGrid, n: int = 1) -> Calibration:
    """Deterministic startup scan; cached per (grid, n)."""
    # -- r0 from the C^1 size of the path remainder g0 = g2 + i g1
    s_vals = np.linspace(1e-3, 0.95, 400)
    g12 = _g0_scan(grid, s_vals)
    gmod = np.hypot(g12[:, 0], g12[:, 1])
    dg = np.hypot(np.gradient(g12[:, 0], s_vals), np.gradient(g12[:, 1], s_vals))
    g0_norm = float(np.max(gmod) + np.max(dg))
    r0 = 0.99 * min(1.0 / g0_norm, 1.0) / 16.0

    # -- c0 surrogates for F (t = 1 by homogeneity)
    c0_sup = 0.0
    c0_deriv = 0.0
    directions = _scan_directions(n)
    for s in (0.05, 0.2, 0.5, 0.9):
        for d in directions:
            p = FamilyParams.from_complex(s * d, 1.0)
            disc = family_F(p, grid)
            dth = np.max(np.abs(np.diff(disc.traces, axis=1))) / grid.step
            c0_sup = max(c0_sup, float(np.max(np.abs(disc.traces))), float(dth))
            h = 1e-5 * s
            p2 = FamilyParams.from_complex(s * d + h * d, 1.0)
            diff = family_F(p2, grid).traces - disc.traces
            c0_deriv = max(c0_deriv, float(np.max(np.abs(diff)) / h * s))

    # -- theta0: largest symmetric arc on which every scanned F' stays in
    # (R+)^n, i.e. Re >= -1e-12 and |Im| <= 1e-12 at t = 1, shrunk by a
    # few nodes as a guard band against unsampled parameters
    nodes = grid.nodes
    order = np.argsort(np.abs(nodes), kind="stable")
    attach_ok = np.ones(grid.m, dtype=bool)
    c0_prime_sup = 0.0
    for s in (0.005, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2):
        if s >= 1.0 / (2.0 * n):
            continue
        for d in list(directions) + _random_directions(n, 16):
            p = FamilyParams.from_complex(s * d, 1.0)
            disc = family_Fprime(p, grid)
            c0_prime_sup = max(c0_prime_sup, float(np.max(np.abs(disc.traces))))
            ok = (disc.traces.real.min(axis=0) >= -1e-12) & (
                np.abs(disc.traces.imag).max(axis=0) <= 1e-12
            )
            attach_ok &= ok
    good = 0
    for idx in order:
        if not attach_ok[idx]:
            break
        good += 1
    guard = max(0, good - 1 - 4)
    theta0 = abs(nodes[order[guard]]) if guard > 0 else 0.0

    # -- r0' from the measured Lipschitz constant of g'(z) = Phi'(z) - t z
    r0p = _calibrate_r0_prime(grid, n)
    return Calibration(
        grid_m=grid.m,
        r0=float(r0),
        r0_prime=float(r0p),
        theta0=float(theta0),
        c0_sup=float(c0_sup),
        c0_deriv=float(c0_deriv),
        c0_prime_sup=float(c0_prime_sup),
        g0_norm=g0_norm,
    )


def _scan_directions(n: int):
    """Small fixed set of unit directions in R^2n = C^n."""
    dirs = []
    if n == 1:
        angles = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
        dirs = [np.array([math.cos(a) + 1j * math.sin(a)]) for a in angles]
    else:
        base = np.linspace(0.0, 2.0 * math.pi, 6, endpoint=False)
        for a in base:
            v = np.full(n, (math.cos(a) + 1j * math.sin(a)) / math.sqrt(n))
            dirs.append(v)
            w = np.zeros(n, dtype=complex)
            w[0] = math.cos(a) + 1j * math.sin(a)
            dirs.append(w)
    return dirs


def _random_directions(n: int, count: int):
    """Seeded unit directions used only by the calibration scans."""
    from .rng import Rng

    rng = Rng(0x5EEDD15C)
    out = []
    for _ in range(count):
        v = np.asarray(rng.sphere(2 * n))
        out.append(v[:n] + 1j * v[n:])
    return out


def _phi_prime(zv: np.ndarray, t: float, grid: CircleGrid) -> np.ndarray:
    p = FamilyParams.from_complex(zv, t)
    disc = family_Fprime(p, grid)
    return disc.eval(1.0 - math.sqrt(p.norm))


def _calibrate_r0_prime(grid: CircleGrid, n: int) -> float:
    cap = 0.45 / (2.0 * n)
    radii = np.geomspace(1e-3, cap, 14)
    dirs = _scan_directions(n)
    best = radii[0]
    for r in radii:
        lip = 0.0
        for d in dirs:
            za = 2.0 * r * 0.98 * d
            h = 1e-4 * r
            for pert in (d, 1j * d):
                zb = za + h * pert
                fa = _phi_prime(za, 1.0, grid)
                fb = _phi_prime(zb, 1.0, grid)
                ga = fa - za
                gb = fb - zb
                lip = max(lip, float(np.linalg.norm(gb - ga) / h))
        if lip <= 0.45:
            best = r
        else:
            break
    return float(best)


# ----------------------------------------------------------------- capture
def _capture(phi, a_scale: float, target: np.ndarray, radius: float, tol: float):
    """Fixed point z <- (target - g(z))/a from 0, g = phi - a*id, phi(0) = 0."""
    z = np.zeros_like(target)
    phi_z = np.zeros_like(target)
    for _ in range(500):
        g = phi_z - a_scale * z
        z = (target - g) / a_scale
        nz = float(np.linalg.norm(z))
        if nz == 0.0 or nz > radius:
            raise CaptureFailure("capture iterate left the admissible ball")
        phi_z = phi(z)
        if float(np.linalg.norm(phi_z - target)) <= tol:
            return z
    raise CaptureFailure("capture did not converge in 500 iterations")


def capture_F(z_target, t: float, grid: CircleGrid, tol: float = 1e-8) -> FamilyParams:
    """Find z* with F(1 - |z*| + i|z*|, z*, t) = t * z_target, |z*| <= 2|z_target|."""
    z_target = np.atleast_1d(np.asarray(z_target, dtype=complex))
    n = len(z_target)
    cal = calibrate(grid, n)
    tn = float(np.linalg.norm(_c2r(z_target)))
    if not 0.0 < tn < cal.r0:
        raise PreconditionError(
            f"target must be nonzero with norm below the calibrated r0 = {cal.r0:.3g}"
        )

    def phi(zv):
        p = FamilyParams.from_complex(zv, t)
        s = p.norm
        return family_F(p, grid).eval(1.0 - s + 1j * s)

    z_star = _capture(phi, t, t * z_target, radius=2.0 * cal.r0, tol=tol)
    return FamilyParams.from_complex(z_star, t)


def capture_Fprime(z_target, t: float, grid: CircleGrid, tol: float = 1e-8) -> FamilyParams:
    """Find z* with F'(1 - |z*|, z*, t) = t * z_target, |z*| <= 2|z_target|."""
    z_target = np.atleast_1d(np.asarray(z_target, dtype=complex))
    n = len(z_target)
    cal = calibrate(grid, n)
    tn = float(np.linalg.norm(_c2r(z_target)))
    if not 0.0 < tn < cal.r0_prime:
        raise PreconditionError(
            f"target must be nonzero with norm below the calibrated r0' = {cal.r0_prime:.3g}"
        )
    z_star = _capture(
        lambda zv: _phi_prime(zv, t, grid),
        t,
        t * z_target,
        radius=2.0 * cal.r0_prime,
        tol=tol,
    )
    return FamilyParams.from_complex(z_star, t)


def _c2r(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag])
