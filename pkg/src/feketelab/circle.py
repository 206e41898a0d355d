"""Spectral machinery on the unit circle and disc.

Real functions on the boundary circle are carried as equispaced samples
together with their trigonometric coefficients.  On top of that sit the
harmonic extension to the disc, the conjugate-function (Hilbert) transforms
T and T1 = T - T(1), derivative and moment functionals of the extension at
the boundary point 1, a grid estimate of Hoelder norms, and the dual bump
pair (u1, u2) whose extension derivatives at 1 hit prescribed values.

Conventions.  Nodes are theta_j = 2*pi*j/M - pi.  A function with cosine
coefficients a_0..a_{M/2} and sine coefficients b_1..b_{M/2-1} extends
harmonically as u(r e^{i theta}) = a_0 + sum_k r^k (a_k cos + b_k sin),
i.e. u(z) = a_0 + Re sum_k (a_k - i b_k) z^k.  T maps cos k -> sin k and
sin k -> -cos k, so that u + i T u has one-sided spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import DegenerateBumpError, DomainError, InputError, PreconditionError

TWO_PI = 2.0 * math.pi


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CircleGrid:
    """Equispaced boundary grid theta_j = 2*pi*j/M - pi, M a power of two."""

    m: int

    def __post_init__(self):
        if self.m < 8 or self.m & (self.m - 1) != 0:
            raise InputError(f"grid size must be a power of two >= 8, got {self.m}")

    @cached_property
    def nodes(self) -> np.ndarray:
        return _readonly(TWO_PI * np.arange(self.m) / self.m - math.pi)

    @property
    def step(self) -> float:
        return TWO_PI / self.m

    @property
    def index_of_one(self) -> int:
        """Index of the node theta = 0, i.e. the boundary point xi = 1."""
        return self.m // 2


@dataclass(frozen=True)
class HolderSpec:
    """Derivative order k and Hoelder exponent beta of a C^{k,beta} norm."""

    k: int
    beta: float

    def __post_init__(self):
        if not 0 <= self.k <= 4:
            raise InputError("derivative order must be in 0..4")
        if not 0.0 < self.beta < 1.0:
            raise InputError("Hoelder exponent must lie in (0, 1)")


class CircleFunction:
    """Real boundary function: samples at grid nodes plus cached coefficients.

    Immutable; arithmetic returns new instances.  Coefficients and samples
    are kept consistent by construction (the transform pair is exact on
    band-limited data).
    """

    __slots__ = ("grid", "samples", "_a", "_b")

    def __init__(self, grid: CircleGrid, samples: np.ndarray):
        samples = np.asarray(samples, dtype=float)
        if samples.shape != (grid.m,):
            raise InputError(
                f"expected {grid.m} samples, got shape {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise InputError("samples must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", _readonly(samples))
        a, b = _analyze(grid, self.samples)
        object.__setattr__(self, "_a", _readonly(a))
        object.__setattr__(self, "_b", _readonly(b))

    def __setattr__(self, *_):
        raise AttributeError("CircleFunction is immutable")

    @property
    def a(self) -> np.ndarray:
        """Cosine coefficients a_0..a_{M/2}."""
        return self._a

    @property
    def b(self) -> np.ndarray:
        """Sine coefficients, index-aligned with a (b_0 = b_{M/2} = 0)."""
        return self._b

    @classmethod
    def from_coeffs(cls, grid: CircleGrid, a, b) -> "CircleFunction":
        return cls(grid, _synthesize(grid, np.asarray(a, float), np.asarray(b, float)))

    @classmethod
    def from_callable(cls, grid: CircleGrid, f) -> "CircleFunction":
        return cls(grid, np.asarray([f(t) for t in grid.nodes], dtype=float))

    def value_at_one(self) -> float:
        """Boundary value at xi = 1 (a grid node)."""
        return float(self.samples[self.grid.index_of_one])

    def __add__(self, other):
        if isinstance(other, CircleFunction):
            self._check_grid(other)
            return CircleFunction(self.grid, self.samples + other.samples)
        return CircleFunction(self.grid, self.samples + float(other))

    def __sub__(self, other):
        if isinstance(other, CircleFunction):
            self._check_grid(other)
            return CircleFunction(self.grid, self.samples - other.samples)
        return CircleFunction(self.grid, self.samples - float(other))

    def __rmul__(self, c: float):
        return CircleFunction(self.grid, float(c) * self.samples)

    __mul__ = __rmul__

    def __neg__(self):
        return CircleFunction(self.grid, -self.samples)

    def _check_grid(self, other: "CircleFunction"):
        if other.grid.m != self.grid.m:
            raise InputError("grid sizes differ")

    def theta_derivative(self, order: int = 1) -> "CircleFunction":
        """Spectral derivative d^order/dtheta^order as a boundary function."""
        a, b = self._a.copy(), self._b.copy()
        k = np.arange(len(a), dtype=float)
        for _ in range(order):
            a, b = k * b, -k * a
        a[-1] = 0.0  # Nyquist sine is invisible on the grid
        b[-1] = 0.0
        return CircleFunction.from_coeffs(self.grid, a, b)


def _analyze(grid: CircleGrid, samples: np.ndarray):
    m = grid.m
    c = np.fft.rfft(samples) / m
    # nodes start at -pi, not 0: shift by e^{-ik pi} = (-1)^k
    signs = np.where(np.arange(m // 2 + 1) % 2 == 0, 1.0, -1.0)
    c = c * signs
    a = 2.0 * c.real
    a[0] = c[0].real
    a[-1] = c[-1].real
    b = -2.0 * c.imag
    b[0] = 0.0
    b[-1] = 0.0
    return a, b


def _synthesize(grid: CircleGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = grid.m
    if a.shape != (m // 2 + 1,) or b.shape != (m // 2 + 1,):
        raise InputError("coefficient arrays must have length M/2 + 1")
    c = 0.5 * (a - 1j * b)
    c[0] = a[0]
    c[-1] = a[-1]
    signs = np.where(np.arange(m // 2 + 1) % 2 == 0, 1.0, -1.0)
    return np.fft.irfft(c * signs, n=m) * m


def analyze(grid: CircleGrid, samples) -> CircleFunction:
    """Build a CircleFunction from raw samples (discrete trig transform)."""
    return CircleFunction(grid, np.asarray(samples, dtype=float))


@dataclass(frozen=True)
class HarmonicEval:
    """Harmonic extension of a boundary function, evaluated by its series."""

    base: CircleFunction

    def __call__(self, z) -> float:
        return harmonic_extend(self.base, z)


def harmonic_extend(u: CircleFunction, z) -> float:
    """Evaluate the harmonic extension at an interior point, |z| <= 1 - 1e-9."""
    z = complex(z)
    if abs(z) > 1.0 - 1e-9:
        raise DomainError(f"harmonic extension requires |z| <= 1 - 1e-9, got {abs(z)}")
    kmax = len(u.a) - 1
    powers = z ** np.arange(kmax + 1)
    coeff = u.a - 1j * u.b
    coeff[0] = u.a[0]
    return float(np.real(np.sum(coeff * powers)))


def hilbert_T(u: CircleFunction) -> CircleFunction:
    """Hilbert transform: boundary trace of the conjugate vanishing at 0.

    Acts per mode as cos k -> sin k, sin k -> -cos k; the Nyquist mode's
    conjugate is invisible on the grid and is set to zero.
    """
    va = -u.b.copy()
    vb = u.a.copy()
    va[0] = 0.0
    vb[0] = 0.0
    va[-1] = 0.0
    vb[-1] = 0.0
    return CircleFunction.from_coeffs(u.grid, va, vb)


def hilbert_T1(u: CircleFunction) -> CircleFunction:
    """Shifted transform T1 u = T u - T u(1); vanishes at xi = 1 exactly."""
    v = hilbert_T(u)
    shift = v.value_at_one()
    return CircleFunction(u.grid, v.samples - shift)


def conjugate_disc(u: CircleFunction):
    """One-dimensional analytic disc with boundary trace -T1 u + i u."""
    from .discs import AnalyticDisc  # deferred: discs builds on this module

    trace = -hilbert_T1(u).samples + 1j * u.samples
    return AnalyticDisc.from_traces(u.grid, trace[None, :])


@dataclass(frozen=True)
class DerivsAtOne:
    """Derivatives of the harmonic extension at the boundary point 1."""

    dx: float
    dy: float
    dxx: float
    dyy: float
    dxy: float
    dtheta: float
    dtheta2: float


def derivs_at_one(u: CircleFunction) -> DerivsAtOne:
    """First and second derivatives at z = 1, summed from the coefficient series."""
    k = np.arange(len(u.a), dtype=float)
    dx = float(np.sum(k * u.a))
    dy = float(np.sum(k * u.b))
    dxx = float(np.sum(k * (k - 1.0) * u.a))
    dxy = float(np.sum(k * (k - 1.0) * u.b))
    dtheta2 = -float(np.sum(k * k * u.a))
    return DerivsAtOne(
        dx=dx, dy=dy, dxx=dxx, dyy=-dxx, dxy=dxy, dtheta=dy, dtheta2=dtheta2
    )


def rho1(theta):
    """Kernel representing d/dx of the extension at 1 against the boundary."""
    return 1.0 / (TWO_PI * (np.cos(theta) - 1.0))


def rho2(theta):
    """Kernel representing d2/dxdy of the extension at 1 against the boundary."""
    return -np.sin(theta) / (TWO_PI * (np.cos(theta) - 1.0) ** 2)


def _support_mask(grid: CircleGrid) -> np.ndarray:
    """Nodes strictly inside the back half |theta| > pi/2."""
    return np.abs(grid.nodes) > math.pi / 2.0 + 1e-12


def moment_rho(u: CircleFunction, which: int) -> float:
    """Quadrature of u against rho_1 or rho_2, restricted to |theta| > pi/2.

    Requires u to vanish on the closed front half; otherwise the kernel
    singularity at theta = 0 makes the integral meaningless.
    """
    if which not in (1, 2):
        raise InputError("which must be 1 or 2")
    grid = u.grid
    mask = _support_mask(grid)
    front = ~mask
    scale = float(np.max(np.abs(u.samples))) or 1.0
    if np.any(np.abs(u.samples[front]) > 1e-13 * scale):
        raise PreconditionError("u must vanish identically on the front half circle")
    kern = rho1 if which == 1 else rho2
    theta = grid.nodes[mask]
    return float(np.sum(u.samples[mask] * kern(theta)) * grid.step)


def holder_norm(u: CircleFunction, spec: HolderSpec) -> float:
    """Grid estimate of the C^{k,beta} norm on the boundary circle.

    C^k part: sup over nodes of spectral derivatives up to order k.
    Seminorm: max difference quotient over node pairs with chordal distance
    at most pi/4, plus all antipodal pairs.  A lower bound of the true norm,
    converging from below as M grows.
    """
    grid = u.grid
    derivs = [u.samples]
    f = u
    for _ in range(spec.k):
        f = f.theta_derivative()
        derivs.append(f.samples)
    ck = max(float(np.max(np.abs(d))) for d in derivs)

    top = derivs[-1]
    m = grid.m
    # chord(l) = 2 sin(pi l / M); l_max from chord <= pi/4
    lmax = int(math.floor(2.0 * math.asin(math.pi / 8.0) / grid.step))
    semi = 0.0
    lags = list(range(1, max(2, lmax + 1))) + [m // 2]
    for lag in lags:
        chord = 2.0 * math.sin(math.pi * lag / m)
        diff = float(np.max(np.abs(np.roll(top, -lag) - top)))
        semi = max(semi, diff / chord**spec.beta)
    return ck + semi


def ebump(s):
    """The standard smooth bump exp(-1/(1-s^2)) on |s| < 1, zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


def _bump_samples(grid: CircleGrid, center: float, halfwidth: float) -> np.ndarray:
    """Samples of an even-in-theta bump pair at |theta| ~ center (wrapped)."""
    theta = np.abs(grid.nodes)
    return ebump((theta - center) / halfwidth)


# Support choices, both inside the open back half {|theta| > pi/2} where
# the kernels are integrable against them.  bump_u_minus fills the whole
# back half; chi is centered at 3 pi/4 with halfwidth pi/4, which keeps
# the dual pair (and everything the disc families build from it) small.
_BUMP_CENTER = math.pi
_BUMP_HALFWIDTH = math.pi / 2.0
_CHI_CENTER = 3.0 * math.pi / 4.0
_CHI_HALFWIDTH = math.pi / 4.0


@lru_cache(maxsize=None)
def bump_u_minus(grid: CircleGrid) -> CircleFunction:
    """Smooth bump on {|theta| > pi/2} scaled so that dx u(1) = -1."""
    raw = _bump_samples(grid, _BUMP_CENTER, _BUMP_HALFWIDTH)
    raw[~_support_mask(grid)] = 0.0
    u0 = CircleFunction(grid, raw)
    m1 = moment_rho(u0, 1)
    return CircleFunction(grid, -raw / m1)


@lru_cache(maxsize=None)
def chi_bump(grid: CircleGrid) -> CircleFunction:
    """The fixed dual-basis bump, supported in the open back half."""
    raw = _bump_samples(grid, _CHI_CENTER, _CHI_HALFWIDTH)
    raw[~_support_mask(grid)] = 0.0
    return CircleFunction(grid, raw)


@lru_cache(maxsize=None)
def dual_basis(grid: CircleGrid):
    """Functions (u1, u2), zero on the front half, with unit moment matrix.

    u1 has dx u1(1) = 1 and dxdy u1(1) = 0; u2 the transpose.  Built from
    a_j = chi * rho_j by solving the 2x2 Gram system for b_i in span{a_1,
    a_2} with quadrature pairings delta_ij, then u_i = chi * b_i.
    """
    chi = chi_bump(grid)
    mask = chi.samples > 0.0
    theta = grid.nodes
    a1 = np.zeros(grid.m)
    a2 = np.zeros(grid.m)
    a1[mask] = chi.samples[mask] * rho1(theta[mask])
    a2[mask] = chi.samples[mask] * rho2(theta[mask])
    gram = grid.step * np.array(
        [
            [np.sum(a1 * a1), np.sum(a1 * a2)],
            [np.sum(a2 * a1), np.sum(a2 * a2)],
        ]
    )
    if np.linalg.cond(gram) > 1e12:
        raise DegenerateBumpError("Gram matrix of the dual bump pair is degenerate")
    beta = np.linalg.inv(gram)
    b1 = beta[0, 0] * a1 + beta[0, 1] * a2
    b2 = beta[1, 0] * a1 + beta[1, 1] * a2
    u1 = CircleFunction(grid, chi.samples * b1)
    u2 = CircleFunction(grid, chi.samples * b2)
    return u1, u2
