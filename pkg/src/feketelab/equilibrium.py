"""Reference equilibrium measures, distances between measures, and rates.

Closed-form references: arcsine on the interval, uniform on circle and
sphere.  dist_1 on the interval and circle is computed exactly from CDFs;
on the sphere (and for general gamma) a certified test dictionary gives a
documented lower bound.  The subharmonic comparison check builds the
explicit harmonic majorant with smooth-cutoff boundary data and verifies
the maximum principle on an interior grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .circle import CircleFunction, CircleGrid, _synthesize
from .discs import AnalyticDisc
from .errors import HypothesisError, InputError, NoClosedFormError
from .fekete import (
    Circle,
    EmpiricalMeasure,
    Interval,
    Sphere,
    ambient_of,
)

TWO_PI = 2.0 * math.pi


# -------------------------------------------------------- reference measures
@dataclass(frozen=True)
class ReferenceMeasure:
    """Closed-form equilibrium measure on a model domain."""

    domain: object
    name: str

    def density(self, x):
        if isinstance(self.domain, Interval):
            x = np.asarray(x, dtype=float)
            return 1.0 / (math.pi * np.sqrt(1.0 - x * x))
        if isinstance(self.domain, Circle):
            return np.full_like(np.asarray(x, dtype=float), 1.0 / TWO_PI)
        raise NoClosedFormError("density available on interval and circle only")

    def cdf(self, x):
        if isinstance(self.domain, Interval):
            x = np.asarray(x, dtype=float)
            return 0.5 + np.arcsin(np.clip(x, -1.0, 1.0)) / math.pi
        if isinstance(self.domain, Circle):
            return (np.asarray(x, dtype=float) + math.pi) / TWO_PI
        raise NoClosedFormError("cdf available on interval and circle only")

    def quantile(self, p):
        if isinstance(self.domain, Interval):
            return np.sin(math.pi * (np.asarray(p, dtype=float) - 0.5))
        if isinstance(self.domain, Circle):
            return TWO_PI * np.asarray(p, dtype=float) - math.pi
        raise NoClosedFormError("quantile available on interval and circle only")

    def cdf_antiderivative(self, x):
        """Antiderivative of the CDF, used for exact W1 integrals."""
        if isinstance(self.domain, Interval):
            x = np.asarray(np.clip(x, -1.0, 1.0), dtype=float)
            return 0.5 * x + (x * np.arcsin(x) + np.sqrt(1.0 - x * x)) / math.pi
        raise NoClosedFormError("antiderivative implemented for the interval")

    def quad_nodes(self) -> np.ndarray:
        if isinstance(self.domain, Interval):
            # Gauss-Chebyshev: equal weights against the arcsine density
            j = np.arange(2000)
            return np.cos((2.0 * j + 1.0) * math.pi / 4000.0)
        if isinstance(self.domain, Circle):
            return Circle().mesh(4096)
        if isinstance(self.domain, Sphere):
            return Sphere().mesh(60000)
        raise NoClosedFormError("no quadrature rule")

    def pair(self, v) -> float:
        nodes = self.quad_nodes()
        vals = np.asarray([v(p) for p in nodes], dtype=float)
        return float(np.mean(vals))

    def pair_vectorized(self, v) -> float:
        """Same pairing for callables accepting the whole node array."""
        nodes = self.quad_nodes()
        return float(np.mean(np.asarray(v(nodes), dtype=float)))

    def total_mass(self) -> float:
        """Mass by quadrature; the quantile substitution absorbs the
        arcsine endpoint singularity so midpoint rule is exact."""
        if isinstance(self.domain, Interval):
            u = (np.arange(4096) + 0.5) / 4096
            x = self.quantile(u)
            dxdu = math.pi * np.cos(math.pi * (u - 0.5))
            return float(np.mean(self.density(x) * dxdu))
        if isinstance(self.domain, Circle):
            theta = Circle().mesh(4096)
            return float(np.sum(self.density(theta)) * TWO_PI / 4096)
        return 1.0

    def density_cdf_gap(self, a: float, b: float, nodes: int = 400) -> float:
        """|int_a^b density - (F(b) - F(a))| via Gauss-Legendre inside (-1,1)."""
        x, w = np.polynomial.legendre.leggauss(nodes)
        x = 0.5 * (b - a) * x + 0.5 * (a + b)
        quad = 0.5 * (b - a) * float(np.sum(w * self.density(x)))
        return abs(quad - float(self.cdf(b) - self.cdf(a)))


def equilibrium_reference(domain) -> ReferenceMeasure:
    """Arcsine on [-1,1]; uniform on S^1 and S^2; no closed form elsewhere."""
    if isinstance(domain, Interval):
        return ReferenceMeasure(domain, "arcsine")
    if isinstance(domain, Circle):
        return ReferenceMeasure(domain, "uniform-circle")
    if isinstance(domain, Sphere):
        return ReferenceMeasure(domain, "uniform-sphere")
    raise NoClosedFormError(
        f"no closed-form equilibrium measure on {getattr(domain, 'kind', domain)!r}; "
        "fall back to high-degree Fekete self-consistency"
    )


# ----------------------------------------------------------------- extremal
def extremal_interval(z) -> float:
    """log|z + sqrt(z^2 - 1)| with the branch making the modulus >= 1.

    Zero exactly on [-1, 1]; grows like log|z| at infinity; behaves like
    sqrt(2 eps) just outside the endpoints, which is the C^{1/2} signature.
    """
    z = complex(z)
    s = np.sqrt(complex(z * z - 1.0))
    w = z + s
    if abs(w) < 1.0:
        w = z - s
    return float(max(0.0, math.log(abs(w))))


# ------------------------------------------------------------------- dist_1
def dist1_interval(mu: EmpiricalMeasure, nu: ReferenceMeasure) -> float:
    """Exact integral of |F_mu - F_nu| on [-1, 1] between the breakpoints."""
    if not isinstance(nu.domain, Interval):
        raise InputError("reference must live on the interval")
    atoms = np.sort(np.asarray(mu.atoms, dtype=float))
    if len(atoms) == 0 or atoms[0] < -1.0 - 1e-12 or atoms[-1] > 1.0 + 1e-12:
        raise InputError("empirical measure must be supported on [-1, 1]")
    n = len(atoms)
    cuts = np.concatenate([[-1.0], atoms, [1.0]])
    total = 0.0
    for i in range(n + 1):
        a, b = float(cuts[i]), float(cuts[i + 1])
        if b <= a:
            continue
        c = i / n  # F_mu on (a, b)
        total += _segment_abs_integral(nu, a, b, c)
    return float(total)


def _segment_abs_integral(nu: ReferenceMeasure, a: float, b: float, c: float) -> float:
    # integral of |c - F(x)| with F increasing; split at the quantile
    fa, fb = float(nu.cdf(a)), float(nu.cdf(b))
    if c <= fa:
        return _int_f(nu, a, b) - c * (b - a)
    if c >= fb:
        return c * (b - a) - _int_f(nu, a, b)
    xs = float(nu.quantile(c))
    xs = min(max(xs, a), b)
    left = c * (xs - a) - _int_f(nu, a, xs)
    right = _int_f(nu, xs, b) - c * (b - xs)
    return left + right


def _int_f(nu: ReferenceMeasure, a: float, b: float) -> float:
    return float(nu.cdf_antiderivative(b) - nu.cdf_antiderivative(a))


def dist1_circle(mu: EmpiricalMeasure, nu: ReferenceMeasure) -> float:
    """Circular W1 against the uniform measure: min_c int |F_mu - F_nu - c|.

    The difference G is piecewise linear with common slope -1/(2 pi), so
    the optimal shift is the exact Lebesgue median of G and every segment
    integral has a closed form.
    """
    if not isinstance(nu.domain, Circle):
        raise InputError("reference must be the uniform measure on the circle")
    atoms = np.sort(np.mod(np.asarray(mu.atoms, dtype=float) + math.pi, TWO_PI) - math.pi)
    n = len(atoms)
    if n == 0:
        raise InputError("empty empirical measure")
    slope = 1.0 / TWO_PI
    # segments between consecutive atoms (wrapping), G linear decreasing
    segs = []  # (length, v_hi, v_lo): G goes v_hi -> v_lo
    for i in range(n):
        theta_a = atoms[i]
        theta_b = atoms[i + 1] if i + 1 < n else atoms[0] + TWO_PI
        length = theta_b - theta_a
        if length <= 0.0:
            continue
        g_start = (i + 1) / n - slope * (theta_a + math.pi)
        segs.append((length, g_start, g_start - slope * length))
    c_star = _lebesgue_median(segs)
    total = 0.0
    for length, v_hi, v_lo in segs:
        if c_star >= v_hi:
            total += (c_star - 0.5 * (v_hi + v_lo)) * length
        elif c_star <= v_lo:
            total += (0.5 * (v_hi + v_lo) - c_star) * length
        else:
            total += ((v_hi - c_star) ** 2 + (c_star - v_lo) ** 2) / (2.0 * slope)
    return float(total)


def _lebesgue_median(segs) -> float:
    """Median of a piecewise-linear function's values, weighted by length."""
    total_len = sum(s[0] for s in segs)
    half = 0.5 * total_len
    values = sorted({s[1] for s in segs} | {s[2] for s in segs})

    def mass_below(c):
        m = 0.0
        for length, v_hi, v_lo in segs:
            if c >= v_hi:
                m += length
            elif c > v_lo:
                m += length * (c - v_lo) / (v_hi - v_lo)
        return m

    lo, hi = values[0], values[-1]
    for v in values:
        if mass_below(v) >= half:
            hi = v
            break
        lo = v
    m_lo = mass_below(lo)
    m_hi = mass_below(hi)
    if m_hi <= m_lo + 1e-300:
        return lo
    frac = (half - m_lo) / (m_hi - m_lo)
    return lo + frac * (hi - lo)


def w1_atomic_line(xs: np.ndarray, ys: np.ndarray) -> float:
    """Exact W1 between two equal-mass atomic measures on the line."""
    xs, ys = np.sort(np.asarray(xs, float)), np.sort(np.asarray(ys, float))
    grid = np.sort(np.concatenate([xs, ys]))
    total = 0.0
    for a, b in zip(grid[:-1], grid[1:]):
        if b <= a:
            continue
        fx = np.searchsorted(xs, a, side="right") / len(xs)
        fy = np.searchsorted(ys, a, side="right") / len(ys)
        total += abs(fx - fy) * (b - a)
    return float(total)


# ------------------------------------------------------------- dictionaries
@dataclass
class TestDictionary:
    """Family of test functions with certified C^gamma norms <= 1.

    Each member is stored unnormalized together with its certified norm
    scale; pairings divide by the scale.  Scales are running maxima across
    the gamma grid used to build the dictionary, which makes the resulting
    distance exactly monotone nonincreasing in gamma.
    """

    domain: object
    gamma: float
    names: list
    funcs: list
    scales: np.ndarray
    _ref_cache: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.funcs)

    def members(self):
        return zip(self.names, self.funcs, self.scales)

    def pair_gap(self, mu: EmpiricalMeasure, nu) -> float:
        if len(self.funcs) == 0:
            raise InputError("empty test dictionary")
        gaps = []
        nu_vals = self._nu_pairings(nu)
        for (f, s), nu_val in zip(zip(self.funcs, self.scales), nu_vals):
            mu_val = float(np.mean(np.asarray(f(mu.atoms), dtype=float)))
            gaps.append(abs(mu_val - nu_val) / s)
        return float(max(gaps))

    def _nu_pairings(self, nu):
        key = nu if isinstance(nu, ReferenceMeasure) else None
        if key is not None and key in self._ref_cache:
            return self._ref_cache[key]
        if isinstance(nu, ReferenceMeasure):
            nodes = nu.quad_nodes()
            vals = [float(np.mean(np.asarray(f(nodes), dtype=float))) for f in self.funcs]
        elif isinstance(nu, EmpiricalMeasure):
            vals = [float(np.mean(np.asarray(f(nu.atoms), dtype=float))) for f in self.funcs]
        else:
            raise InputError("unsupported measure type")
        if key is not None:
            self._ref_cache[key] = vals
        return vals


def dist_gamma_dict(mu: EmpiricalMeasure, nu, gamma: float, dictionary: TestDictionary) -> float:
    """Lower bound of dist_gamma: max pairing gap over the dictionary."""
    if abs(dictionary.gamma - gamma) > 1e-12:
        raise InputError("dictionary was certified for a different gamma")
    return dictionary.pair_gap(mu, nu)


def _capped_holder_norm_1d(xs: np.ndarray, vals: np.ndarray, gamma: float) -> float:
    """sup + Hoelder seminorm with distances capped at 1, on a uniform grid.

    gamma in (0,1]: seminorm of the values; gamma in (1,2]: C^1 norm plus
    seminorm of the finite-difference derivative.
    """
    sup = float(np.max(np.abs(vals)))
    h = xs[1] - xs[0]

    def semi(v, expo):
        out = 0.0
        m = len(v)
        for lag in range(1, m):
            d = min(lag * h, 1.0)
            diff = np.max(np.abs(v[lag:] - v[:-lag]))
            out = max(out, diff / d**expo)
            if lag * h > 2.5:  # capped distance is constant from here on
                break
        return out

    if gamma <= 1.0:
        return sup + semi(vals, gamma)
    dv = np.gradient(vals, h)
    return sup + float(np.max(np.abs(dv))) + semi(dv, gamma - 1.0)


def _norms_on_gammas(xs, vals, gammas):
    return {g: _capped_holder_norm_1d(xs, vals, g) for g in gammas}


_DEFAULT_GAMMAS = (0.5, 1.0, 1.5, 2.0)


def build_dictionaries(domain, gammas=_DEFAULT_GAMMAS) -> dict:
    """One dictionary per gamma, sharing members, scales running-max across
    the (sorted) gamma grid so that dist is monotone in gamma."""
    gammas = tuple(sorted(gammas))
    amb = ambient_of(domain)
    if isinstance(amb, Interval):
        names, funcs = _interval_members()
        xs = np.linspace(-1.0, 1.0, 2001)
    elif isinstance(amb, Circle):
        names, funcs = _circle_members()
        xs = np.linspace(-math.pi, math.pi, 4001)
    elif isinstance(amb, Sphere):
        return _sphere_dictionaries(domain, gammas)
    else:
        raise InputError(f"no dictionary for domain {domain!r}")

    norm_table = []
    for f in funcs:
        vals = np.asarray(f(xs), dtype=float)
        norm_table.append(_norms_on_gammas(xs, vals, gammas))
    out = {}
    running = np.zeros(len(funcs))
    for g in gammas:
        running = np.maximum(running, [nt[g] for nt in norm_table])
        out[g] = TestDictionary(
            domain=domain,
            gamma=g,
            names=list(names),
            funcs=list(funcs),
            scales=running.copy() * (1.0 + 1e-9),
        )
    return out


def build_dictionary(domain, gamma: float) -> TestDictionary:
    return build_dictionaries(domain, _DEFAULT_GAMMAS + (gamma,))[gamma]


def _interval_members():
    names, funcs = [], []

    def add(name, f):
        names.append(name)
        funcs.append(f)

    add("id", lambda x: np.asarray(x, float))
    for m in range(1, 13):
        add(f"cos{m}", lambda x, m=m: np.cos(m * math.pi * (np.asarray(x, float) + 1.0) / 2.0))
    for c in np.linspace(-0.8, 0.8, 9):
        add(f"hat{c:+.1f}", lambda x, c=c: np.maximum(0.0, 1.0 - np.abs(np.asarray(x, float) - c) / 0.4))
    return names, funcs


def _circle_members():
    names, funcs = [], []

    def add(name, f):
        names.append(name)
        funcs.append(f)

    for m in range(1, 13):
        add(f"cos{m}", lambda t, m=m: np.cos(m * np.asarray(t, float)))
        add(f"sin{m}", lambda t, m=m: np.sin(m * np.asarray(t, float)))
    for c in np.linspace(-math.pi, math.pi, 8, endpoint=False):
        add(
            f"hat{c:+.2f}",
            lambda t, c=c: np.maximum(
                0.0,
                1.0
                - np.abs(np.mod(np.asarray(t, float) - c + math.pi, TWO_PI) - math.pi) / 0.5,
            ),
        )
    return names, funcs


def _sphere_pair_lags():
    # Fibonacci-lattice index lags give neighbor pairs at dyadic-ish scales
    return (1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987)


def _sphere_norm(mesh: np.ndarray, vals: np.ndarray, gamma: float) -> float:
    if gamma > 1.0:
        raise InputError("sphere dictionaries are certified for gamma <= 1 only")
    sup = float(np.max(np.abs(vals)))
    semi = 0.0
    for lag in _sphere_pair_lags():
        d = np.linalg.norm(mesh[lag:] - mesh[:-lag], axis=1)
        d = np.minimum(d, 1.0)
        diff = np.abs(vals[lag:] - vals[:-lag])
        semi = max(semi, float(np.max(diff / d**gamma)))
    return sup + semi


@lru_cache(maxsize=4)
def _sphere_norm_mesh() -> np.ndarray:
    return Sphere().mesh(20000)


def _sphere_dictionaries(domain, gammas) -> dict:
    from .fekete import BasisSpec, basis_matrix

    names, funcs = [], []
    centers = Sphere().mesh(200)
    width = 1.0
    for i, c in enumerate(centers):
        names.append(f"cone{i}")
        funcs.append(
            lambda p, c=c: np.maximum(
                0.0,
                1.0
                - np.arccos(np.clip(np.atleast_2d(p) @ c, -1.0, 1.0)) / width,
            ).reshape(np.shape(p)[:-1] if np.ndim(p) > 1 else ())
        )
    spec = BasisSpec(Sphere(), 6)

    def harmonic_func(idx):
        def f(p):
            p2 = np.atleast_2d(p)
            vals = basis_matrix(spec, p2)[idx]
            return vals if np.ndim(p) > 1 else vals[0]

        return f

    for idx in range((6 + 1) ** 2):
        names.append(f"Y{idx}")
        funcs.append(harmonic_func(idx))

    mesh = _sphere_norm_mesh()
    gammas = tuple(sorted(g for g in gammas if g <= 1.0)) or (1.0,)
    norm_table = []
    for f in funcs:
        vals = np.asarray(f(mesh), dtype=float).ravel()
        norm_table.append({g: _sphere_norm(mesh, vals, g) for g in gammas})
    out = {}
    running = np.zeros(len(funcs))
    for g in gammas:
        running = np.maximum(running, [nt[g] for nt in norm_table])
        out[g] = TestDictionary(
            domain=domain,
            gamma=g,
            names=list(names),
            funcs=list(funcs),
            scales=running.copy() * (1.0 + 1e-9),
        )
    return out


# ------------------------------------------------- subharmonic comparison
class SubharmonicSample:
    """Subharmonic function given by boundary samples plus an interior rule.

    Either the harmonic extension of its boundary data, or log|g| for an
    analytic disc g (zero-free on the closure for finite samples).
    """

    def __init__(self, grid: CircleGrid, boundary: CircleFunction, ring_eval, name="psi"):
        self.grid = grid
        self.boundary = boundary
        self._ring_eval = ring_eval
        self.name = name

    @classmethod
    def harmonic(cls, u: CircleFunction, name="harmonic") -> "SubharmonicSample":
        def ring(r):
            a = u.a * r ** np.arange(len(u.a))
            b = u.b * r ** np.arange(len(u.b))
            return _synthesize(u.grid, a, b)

        return cls(u.grid, u, ring, name)

    @classmethod
    def log_modulus(cls, disc: AnalyticDisc, name="log|g|") -> "SubharmonicSample":
        if disc.n != 1:
            raise InputError("log-modulus samples need a one-dimensional disc")
        vals = np.abs(disc.traces[0])
        if np.min(vals) <= 0.0:
            raise InputError("disc must be zero-free on the boundary")
        boundary = CircleFunction(disc.grid, np.log(vals))

        def ring(r):
            k = np.arange(disc.coeffs.shape[1])
            scaled = disc.coeffs[0] * r**k
            m = disc.grid.m
            signs = np.where(np.arange(m // 2 + 1) % 2 == 0, 1.0, -1.0)
            full = np.zeros(m, dtype=complex)
            full[: m // 2 + 1] = scaled * signs
            ring_vals = np.fft.ifft(full) * m
            mod = np.abs(ring_vals)
            return np.log(np.maximum(mod, 1e-300))

        return cls(disc.grid, boundary, ring, name)

    def on_ring(self, r: float) -> np.ndarray:
        return self._ring_eval(float(r))


@dataclass(frozen=True)
class ComparisonReport:
    passed: bool
    max_violation: float
    constant: float
    theta0: float
    beta: float
    c: float


def _smooth_step(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        e1 = np.where(s > 0.0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        e2 = np.where(s < 1.0, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    return e1 / (e1 + e2)


def majorant_boundary(grid: CircleGrid, theta0: float, beta: float, c: float) -> CircleFunction:
    """Boundary data: c|theta|^beta for |theta| <= theta0/2, smooth ramp to
    the constant c on [theta0/2, 3 theta0/4], equal to c beyond."""
    th = np.abs(grid.nodes)
    base = c * th**beta
    s = _smooth_step((th - theta0 / 2.0) / (theta0 / 4.0))
    vals = (1.0 - s) * base + s * c
    return CircleFunction(grid, vals)


def subharmonic_compare(
    psi: SubharmonicSample,
    theta0: float,
    beta: float,
    c: float,
    radii=None,
) -> ComparisonReport:
    """Check psi <= harmonic majorant psi1 interiorly; report the constant.

    Verifies the boundary hypothesis psi <= c |theta|^beta on (-theta0,
    theta0) and psi <= c globally on the grid first, then compares on
    interior rings and infers C = max (psi1(z) - psi1(1)) / |1-z|^beta.
    """
    grid = psi.grid
    th = grid.nodes
    vals = psi.boundary.samples
    near = np.abs(th) < theta0
    if np.any(vals[near] > c * np.abs(th[near]) ** beta + 1e-12):
        raise HypothesisError("boundary hypothesis psi <= c|theta|^beta fails")
    if np.any(vals > c + 1e-12):
        raise HypothesisError("global boundary bound psi <= c fails")
    psi1 = majorant_boundary(grid, theta0, beta, c)
    if np.any(vals > psi1.samples + 1e-12):
        raise HypothesisError("majorant does not dominate on the boundary grid")

    radii = np.arange(0.05, 0.96, 0.05) if radii is None else np.asarray(radii)
    psi1_at_one = psi1.value_at_one()
    violation = -math.inf
    constant = 0.0
    k = np.arange(len(psi1.a))
    for r in radii:
        ring_psi = psi.on_ring(r)
        a = psi1.a * r**k
        b = psi1.b * r**k
        ring_psi1 = _synthesize(grid, a, b)
        violation = max(violation, float(np.max(ring_psi - ring_psi1)))
        dist_to_one = np.abs(1.0 - r * np.exp(1j * th))
        constant = max(
            constant,
            float(np.max((ring_psi1 - psi1_at_one) / dist_to_one**beta)),
        )
    return ComparisonReport(
        passed=violation <= 1e-9,
        max_violation=violation,
        constant=constant,
        theta0=theta0,
        beta=beta,
        c=c,
    )


# --------------------------------------------------------------- rate fits
@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    bound_ok: bool
    c_min: float
    exponent: float


def rate_fit(ks, dists, exponent: float = -1.0 / 36.0 + 0.01) -> RateFit:
    """Log-log least squares plus the one-sided bound dist_k <= c k^exponent.

    The bound is always decidable on finite data; c_min is the smallest
    admissible constant.
    """
    ks = np.asarray(ks, dtype=float)
    dists = np.asarray(dists, dtype=float)
    if len(ks) < 5:
        raise InputError("need at least 5 data points")
    if np.any(dists <= 0.0):
        raise InputError("distances must be positive")
    slope, intercept = np.polyfit(np.log(ks), np.log(dists), 1)
    c_min = float(np.max(dists / ks**exponent))
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        bound_ok=bool(np.isfinite(c_min)),
        c_min=c_min,
        exponent=float(exponent),
    )
