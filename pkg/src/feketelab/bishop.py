"""Fixed-point solution of the Bishop-type boundary equations.

Given a graph manifold K_h = {(x, h(x))} the boundary map U solves

    U = data - T1(h(U)) - T1(u_data)

by plain contraction iteration on the grid, with per-iteration sup-norm
change ratios recorded.  The assembled disc U + i(h(U) + u_data) is then
holomorphic and half-attached to K_h.  On top of the solver sit the
capture maps through the disc families (Phi^h and Phi'^h), the tau control
steering the boundary derivative at 1 in the singular case, and the wedge
attachment report.

Thresholds in t are calibrated by bisection on observed contraction, never
taken from closed-form constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circle import CircleFunction, CircleGrid, hilbert_T1
from .discs import (
    AnalyticDisc,
    FamilyParams,
    build_u_zt,
    calibrate,
    u_prime_boundary,
)
from .errors import (
    CaptureFailure,
    ContractionFailure,
    ControlFailure,
    DomainError,
    OutOfChartError,
    PreconditionError,
)

_FIXED_POINT_TOL = 1e-12
_MAX_ITER = 500


@dataclass(frozen=True)
class GraphManifold:
    """Graph {(x, h(x))} with h(0) = 0, Dh(0) = 0 and |h| <= c1 |x|^2.

    `h` maps arrays of shape (..., n) to arrays of the same shape; `radius`
    is the ball on which h may be evaluated (built-in polynomial manifolds
    declare a large one).
    """

    n: int
    h: object
    c1: float
    radius: float = 1.0
    name: str = "h"

    def __post_init__(self):
        z = np.zeros(self.n)
        h0 = np.asarray(self.h(z), dtype=float)
        if h0.shape != (self.n,) or np.max(np.abs(h0)) > 1e-14:
            raise DomainError("h(0) must be the zero vector of length n")
        eps = 1e-7
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = eps
            col = (np.asarray(self.h(e)) - np.asarray(self.h(-e))) / (2 * eps)
            if np.max(np.abs(col)) > 1e-5:
                raise DomainError("Dh(0) must vanish")
        self.spot_check_bounds()

    def spot_check_bounds(self, samples: int = 64):
        """|h(x)| <= c1 |x|^2 and |Dh(x)| <= c1 |x| on a unit-ball sample."""
        from .rng import Rng

        rng = Rng(0xB15409)
        eps = 1e-6
        for _ in range(samples):
            x = np.asarray(rng.ball(self.n))
            hx = np.asarray(self.h(x), dtype=float)
            nx = np.linalg.norm(x)
            if np.linalg.norm(hx) > self.c1 * nx**2 + 1e-12:
                raise DomainError("declared bound |h| <= c1 |x|^2 fails on sample")
            for j in range(self.n):
                e = np.zeros(self.n)
                e[j] = eps
                col = (np.asarray(self.h(x + e)) - np.asarray(self.h(x - e))) / (2 * eps)
                if np.linalg.norm(col) > self.c1 * nx + 1e-4:
                    raise DomainError("declared bound |Dh| <= c1 |x| fails on sample")

    def eval_rows(self, rows: np.ndarray) -> np.ndarray:
        """Apply h to an (n, M) array of boundary samples, columnwise."""
        if np.max(np.abs(rows)) > self.radius:
            raise DomainError(
                f"iterate left the declared domain of {self.name} "
                f"(radius {self.radius})"
            )
        return np.asarray(self.h(rows.T), dtype=float).T


def h_quad(n: int, q: float) -> GraphManifold:
    """h(x) = q * (x_1^2, ..., x_n^2); bounds hold with c1 = 2q exactly."""

    def h(x):
        x = np.asarray(x, dtype=float)
        return q * x * x

    return GraphManifold(n=n, h=h, c1=2.0 * q, radius=1e6, name=f"quad(q={q})")


def h_mix(n: int, q: float) -> GraphManifold:
    """h(x) = q * (x_1 x_2, x_2 x_3, ..., x_n x_1); c1 = 2q (n >= 2)."""

    def h(x):
        x = np.asarray(x, dtype=float)
        return q * x * np.roll(x, -1, axis=-1)

    if n < 2:
        raise DomainError("h_mix needs n >= 2")
    return GraphManifold(n=n, h=h, c1=2.0 * q, radius=1e6, name=f"mix(q={q})")


def h_zero(n: int) -> GraphManifold:
    def h(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return GraphManifold(n=n, h=h, c1=1e-12, radius=1e6, name="zero")


@dataclass
class BishopSolution:
    """Solved boundary map plus diagnostics."""

    grid: CircleGrid
    manifold: GraphManifold
    params: FamilyParams
    U: np.ndarray  # (n, M) real boundary samples
    u_data: np.ndarray  # (n, M) imaginary-part data of the driving family
    iterations: int
    ratio_log: list
    residual: float
    singular: bool

    @property
    def components(self) -> list[CircleFunction]:
        return [CircleFunction(self.grid, row) for row in self.U]

    def geometric_mean_ratio(self) -> float:
        rs = [r for r in self.ratio_log if r > 0]
        if not rs:
            return 0.0
        return float(math.exp(np.mean(np.log(rs))))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.U)))


def _t1_rows(grid: CircleGrid, rows: np.ndarray) -> np.ndarray:
    return np.stack(
        [hilbert_T1(CircleFunction(grid, row)).samples for row in rows]
    )


def _iterate(
    grid: CircleGrid,
    manifold: GraphManifold,
    forcing: np.ndarray,
    u_rows: np.ndarray,
    start: np.ndarray,
) -> tuple[np.ndarray, int, list, float]:
    U = start.copy()
    ratios: list[float] = []
    prev_change = None
    extra_iters = 0
    consecutive_bad = 0
    for k in range(_MAX_ITER):
        h_of_u = manifold.eval_rows(U)
        U_next = forcing - _t1_rows(grid, h_of_u)
        change = float(np.max(np.abs(U_next - U)))
        if prev_change is not None and prev_change > 0.0:
            ratio = change / prev_change
            ratios.append(ratio)
            consecutive_bad = consecutive_bad + 1 if ratio >= 1.0 else 0
            if consecutive_bad >= 5:
                raise ContractionFailure(
                    "iteration ratio >= 1 for 5 consecutive steps (t too large)"
                )
        prev_change = change
        U = U_next
        if k >= 1:
            extra_iters += 1 if change > _FIXED_POINT_TOL else 0
        if change <= _FIXED_POINT_TOL:
            residual = float(
                np.max(np.abs(U - (forcing - _t1_rows(grid, manifold.eval_rows(U)))))
            )
            return U, extra_iters, ratios, residual
    raise ContractionFailure("Bishop iteration did not converge in 500 steps")


def solve_bishop(
    manifold: GraphManifold,
    p: FamilyParams,
    grid: CircleGrid,
    start: np.ndarray | None = None,
) -> BishopSolution:
    """Solve U = t(Re z - Im z) - T1(h(U)) - T1(u_{z,t}) on the grid."""
    if p.n != manifold.n:
        raise PreconditionError("parameter and manifold dimensions differ")
    comps = build_u_zt(p, grid)
    u_rows = np.stack([c.samples for c in comps])
    const = np.asarray([p.t * (re - im) for re, im in zip(p.z_re, p.z_im)])
    forcing = const[:, None] - _t1_rows(grid, u_rows)
    start = u_rows if start is None else start
    U, iters, ratios, residual = _iterate(grid, manifold, forcing, u_rows, start)
    return BishopSolution(
        grid=grid,
        manifold=manifold,
        params=p,
        U=U,
        u_data=u_rows,
        iterations=iters,
        ratio_log=ratios,
        residual=residual,
        singular=False,
    )


def solve_bishop_singular(
    manifold: GraphManifold,
    p: FamilyParams,
    grid: CircleGrid,
    start: np.ndarray | None = None,
) -> BishopSolution:
    """Solve U' = 2t(|z|,...,|z|) - T1(h(U')) - T1(u'_{z,t,tau})."""
    if p.n != manifold.n:
        raise PreconditionError("parameter and manifold dimensions differ")
    if p.tau is None:
        p = FamilyParams(p.z_re, p.z_im, p.t, tau=(0.0,) * p.n)
    comps = u_prime_boundary(p, grid)
    u_rows = np.stack([c.samples for c in comps])
    forcing = 2.0 * p.t * p.norm - _t1_rows(grid, u_rows)
    start = u_rows if start is None else start
    U, iters, ratios, residual = _iterate(grid, manifold, forcing, u_rows, start)
    return BishopSolution(
        grid=grid,
        manifold=manifold,
        params=p,
        U=U,
        u_data=u_rows,
        iterations=iters,
        ratio_log=ratios,
        residual=residual,
        singular=True,
    )


def assemble_Fh(sol: BishopSolution) -> AnalyticDisc:
    """Disc U + i(h(U) + u_data), half-attached to the graph of h."""
    p_rows = sol.manifold.eval_rows(sol.U)
    traces = sol.U + 1j * (p_rows + sol.u_data)
    return AnalyticDisc.from_traces(sol.grid, traces)


def attachment_residual(sol: BishopSolution, disc: AnalyticDisc | None = None) -> float:
    """max over the front half circle of |Im F^h - h(Re F^h)|."""
    disc = assemble_Fh(sol) if disc is None else disc
    front = np.abs(sol.grid.nodes) <= math.pi / 2.0 + 1e-12
    re = disc.traces.real[:, front]
    im = disc.traces.imag[:, front]
    h_re = np.asarray(sol.manifold.h(re.T), dtype=float).T
    return float(np.max(np.abs(im - h_re)))


def phi_h(manifold: GraphManifold, zv: np.ndarray, t: float, grid: CircleGrid):
    """Phi^h(z) = F^h(1 - |z| + i|z|, z, t); returns (value, solution)."""
    p = FamilyParams.from_complex(zv, t)
    sol = solve_bishop(manifold, p, grid)
    disc = assemble_Fh(sol)
    s = p.norm
    return disc.eval(1.0 - s + 1j * s), sol


def phi_h_capture(
    manifold: GraphManifold,
    z_target,
    t: float,
    grid: CircleGrid,
    tol: float = 1e-8,
) -> FamilyParams:
    """Find z* with Phi^h(z*) = z_target; |z*| <= 4 |target| / t."""
    z_target = np.atleast_1d(np.asarray(z_target, dtype=complex))
    cal = calibrate(grid, manifold.n)
    tnorm = float(np.linalg.norm(np.concatenate([z_target.real, z_target.imag])))
    if not 0.0 < tnorm < cal.r0 * t / 2.0:
        raise PreconditionError(
            f"target must be nonzero with norm below r0 t/2 = {cal.r0 * t / 2.0:.3g}"
        )
    z = np.zeros_like(z_target)
    phi_val = np.zeros_like(z_target)
    for _ in range(500):
        g = phi_val - t * z
        z = (z_target - g) / t
        if float(np.linalg.norm(z)) > 2.0 * cal.r0:
            raise CaptureFailure("capture iterate left the admissible ball")
        phi_val, _ = phi_h(manifold, z, t, grid)
        if float(np.linalg.norm(phi_val - z_target)) <= tol:
            return FamilyParams.from_complex(z, t)
    raise CaptureFailure("Phi^h capture did not converge in 500 iterations")


@dataclass(frozen=True)
class TauControl:
    """Result of steering d/dtheta U'(1) to its target value."""

    tau: tuple
    target_deriv: tuple
    newton_steps: int
    residual: float
    second_deriv_gap: float
    solution: BishopSolution


def _theta_derivs_at_one(grid: CircleGrid, rows: np.ndarray):
    d1 = np.empty(rows.shape[0])
    d2 = np.empty(rows.shape[0])
    for j, row in enumerate(rows):
        f = CircleFunction(grid, row)
        k = np.arange(len(f.a), dtype=float)
        d1[j] = float(np.sum(k * f.b))
        d2[j] = -float(np.sum(k * k * f.a))
    return d1, d2


def tau_target(p: FamilyParams) -> np.ndarray:
    s = p.norm
    rt = math.sqrt(s)
    return 2.0 * p.t * np.asarray(p.z_im) / (rt * (2.0 + rt))


def solve_tau(
    manifold: GraphManifold,
    z_param,
    t: float,
    grid: CircleGrid,
    tol: float = 1e-8,
) -> TauControl:
    """Newton in tau so that d/dtheta U'(1) = 2t Im z / (sqrt|z|(2+sqrt|z|)).

    Finite-difference Jacobian with step 1e-5 * t; the leading diagonal
    -10t of the tau derivative serves as the first preconditioner.
    """
    p0 = FamilyParams.from_complex(np.atleast_1d(np.asarray(z_param, complex)), t)
    n = p0.n
    target = tau_target(p0)

    def phi0(tau_vec):
        p = FamilyParams(p0.z_re, p0.z_im, t, tau=tuple(tau_vec))
        sol = solve_bishop_singular(manifold, p, grid)
        d1, d2 = _theta_derivs_at_one(grid, sol.U)
        return d1, d2, sol

    tau = np.zeros(n)
    d1, d2, sol = phi0(tau)
    res = d1 - target
    step_h = 1e-5 * t
    for step in range(50):
        if float(np.linalg.norm(res)) <= tol:
            gap = float(
                np.max(np.abs(d2 - 2.0 * t * (2.0 * p0.norm - np.asarray(p0.z_re)) / p0.norm))
            )
            return TauControl(
                tau=tuple(tau),
                target_deriv=tuple(target),
                newton_steps=step,
                residual=float(np.linalg.norm(res)),
                second_deriv_gap=gap,
                solution=sol,
            )
        if step == 0:
            jac = -10.0 * t * np.eye(n)
        else:
            jac = np.empty((n, n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = step_h
                dp, _, _ = phi0(tau + e)
                dm, _, _ = phi0(tau - e)
                jac[:, j] = (dp - dm) / (2.0 * step_h)
        try:
            delta = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise ControlFailure("singular tau Jacobian") from exc
        tau = tau - delta
        if float(np.linalg.norm(tau)) > 1.0:
            raise OutOfChartError("tau left the unit ball B_n(0, 1)")
        d1, d2, sol = phi0(tau)
        res = d1 - target
    raise ControlFailure("tau Newton did not reach tolerance in 50 steps")


@dataclass(frozen=True)
class WedgeReport:
    theta_t: float
    component_minima: tuple
    attachment_residual: float
    passed: bool


def verify_wedge_attachment(sol: BishopSolution, theta_t: float) -> WedgeReport:
    """Component minima of U' and graph residual over the arc |theta| <= theta_t."""
    grid = sol.grid
    arc = np.abs(grid.nodes) <= theta_t + 1e-15
    minima = tuple(float(np.min(sol.U[j, arc])) for j in range(sol.U.shape[0]))
    disc = assemble_Fh(sol)
    re = disc.traces.real[:, arc]
    im = disc.traces.imag[:, arc]
    h_re = np.asarray(sol.manifold.h(re.T), dtype=float).T
    resid = float(np.max(np.abs(im - h_re)))
    passed = min(minima) >= -1e-9
    return WedgeReport(
        theta_t=float(theta_t),
        component_minima=minima,
        attachment_residual=resid,
        passed=passed,
    )


def phi_h_prime(manifold: GraphManifold, zv: np.ndarray, t: float, grid: CircleGrid):
    """Phi'^h(z) = F'^h_{tau(z,t)}(1 - sqrt|z|, z, t); returns (value, control)."""
    ctrl = solve_tau(manifold, zv, t, grid)
    disc = assemble_Fh(ctrl.solution)
    s = ctrl.solution.params.norm
    return disc.eval(1.0 - math.sqrt(s)), ctrl


def phi_h_prime_capture(
    manifold: GraphManifold,
    z_target,
    t: float,
    grid: CircleGrid,
    tol: float = 1e-8,
):
    """Find z* with Phi'^h(z*) = z_target; reports |1 - z*|^2 <= 2|target|/t."""
    z_target = np.atleast_1d(np.asarray(z_target, dtype=complex))
    cal = calibrate(grid, manifold.n)
    tnorm = float(np.linalg.norm(np.concatenate([z_target.real, z_target.imag])))
    if not 0.0 < tnorm < cal.r0_prime * t / 2.0:
        raise PreconditionError(
            f"target must be nonzero with norm below r0' t/2 = {cal.r0_prime * t / 2.0:.3g}"
        )
    z = np.zeros_like(z_target)
    phi_val = np.zeros_like(z_target)
    for _ in range(500):
        g = phi_val - t * z
        z = (z_target - g) / t
        if float(np.linalg.norm(z)) > 2.0 * cal.r0_prime:
            raise CaptureFailure("capture iterate left the admissible ball")
        phi_val, ctrl = phi_h_prime(manifold, z, t, grid)
        if float(np.linalg.norm(phi_val - z_target)) <= tol:
            s = math.sqrt(float(np.linalg.norm(np.concatenate([z.real, z.imag]))))
            return FamilyParams.from_complex(z, t, tau=ctrl.tau), s * s
    raise CaptureFailure("Phi'^h capture did not converge in 500 iterations")


def calibrate_wedge(
    manifold: GraphManifold,
    t: float,
    grid: CircleGrid,
    n_samples: int = 12,
    guard_nodes: int = 4,
) -> float:
    """Largest uniform arc on which every sampled controlled solution has
    U' >= -1e-9 componentwise; shrunk by a guard band.  Per-sample wedges
    can be read off verify_wedge_attachment reports separately."""
    from .rng import Rng

    rng = Rng(0x3ED6E)
    n = manifold.n
    nodes = grid.nodes
    order = np.argsort(np.abs(nodes), kind="stable")
    ok = np.ones(grid.m, dtype=bool)
    for _ in range(n_samples):
        v = np.asarray(rng.sphere(2 * n))
        r = 0.45 / (2.0 * n) * (0.1 + 0.85 * rng.uniform())
        z = r * (v[:n] + 1j * v[n:])
        ctrl = solve_tau(manifold, z, t, grid)
        ok &= ctrl.solution.U.min(axis=0) >= -1e-9
    good = 0
    for idx in order:
        if not ok[idx]:
            break
        good += 1
    keep = max(0, good - 1 - guard_nodes)
    return float(abs(nodes[order[keep]])) if keep > 0 else 0.0


# ---------------------------------------------------------- t calibration
@lru_cache(maxsize=None)
def calibrate_t_threshold(
    manifold_key: tuple, grid: CircleGrid, singular: bool = False
) -> float:
    """Largest t (by bisection) at which scanned solves contract and attach.

    manifold_key identifies a built-in manifold: ("quad", n, q) or
    ("mix", n, q) or ("zero", n).
    """
    kind, n, *rest = manifold_key
    if kind == "quad":
        manifold = h_quad(n, rest[0])
    elif kind == "mix":
        manifold = h_mix(n, rest[0])
    elif kind == "zero":
        manifold = h_zero(n)
    else:
        raise PreconditionError(f"unknown manifold key {manifold_key}")

    from .rng import Rng

    rng = Rng(0x7E57)
    samples = []
    for _ in range(6):
        v = np.asarray(rng.sphere(2 * n))
        r = 0.3 / (2.0 * n) * (0.2 + 0.8 * rng.uniform())
        samples.append(r * (v[:n] + 1j * v[n:]))

    def works(t: float) -> bool:
        try:
            for z in samples:
                p = FamilyParams.from_complex(z, t)
                if singular:
                    sol = solve_bishop_singular(manifold, p, grid)
                else:
                    sol = solve_bishop(manifold, p, grid)
                if sol.geometric_mean_ratio() >= 1.0:
                    return False
                if attachment_residual(sol) > 1e-9:
                    return False
        except (ContractionFailure, DomainError):
            return False
        return True

    lo, hi = 0.0, 1.0
    if works(hi):
        return 1.0
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        if mid <= 1e-6:
            break
        if works(mid):
            lo = mid
        else:
            hi = mid
    return lo
