"""feketelab: Fekete configurations, equilibrium distances, analytic discs."""

from .circle import (
    CircleFunction,
    CircleGrid,
    HarmonicEval,
    HolderSpec,
    analyze,
    bump_u_minus,
    conjugate_disc,
    derivs_at_one,
    dual_basis,
    harmonic_extend,
    hilbert_T,
    hilbert_T1,
    holder_norm,
    moment_rho,
)
from .discs import (
    AnalyticDisc,
    FamilyParams,
    InverseProblem,
    build_u_delta_gamma,
    build_u_zt,
    calibrate,
    capture_F,
    capture_Fprime,
    family_F,
    family_Fprime,
    family_Fprime_tau,
    solve_quantitative_inverse,
)
from .bishop import (
    BishopSolution,
    GraphManifold,
    TauControl,
    assemble_Fh,
    h_mix,
    h_quad,
    h_zero,
    phi_h_capture,
    phi_h_prime_capture,
    solve_bishop,
    solve_bishop_singular,
    solve_tau,
    verify_wedge_attachment,
)
from .fekete import (
    BasisSpec,
    Circle,
    CircleArc,
    EmpiricalMeasure,
    Interval,
    PointConfiguration,
    Sphere,
    SphericalCap,
    Weight,
    basis_dim,
    eval_basis,
    exchange_refine,
    fekete_measure,
    leja_greedy,
    log_vandermonde,
    zero_weight,
)
from .equilibrium import (
    ReferenceMeasure,
    TestDictionary,
    build_dictionary,
    dist1_circle,
    dist1_interval,
    dist_gamma_dict,
    equilibrium_reference,
    extremal_interval,
    rate_fit,
    subharmonic_compare,
)

__version__ = "0.1.0"
