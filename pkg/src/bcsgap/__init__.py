"""Solver for the BCS-Bogoliubov gap equation with a function-valued
potential: fixed point of the squared-gap integral operator, hypothesis
and admissibility audits, and phase-transition thermodynamics."""

from .constant_gap import ConstantGapCurve, NoSolutionError, delta_const, gap_curve, tau
from .gap_operator import (
    AdmissibilityAudit,
    GapField,
    GridSpec,
    SingularFieldError,
    SolveOptions,
    SolveReport,
    apply_gap_operator,
    audit_admissibility,
    evaluate_at,
    lipschitz_bound,
    make_temperature_grid,
    operator_t_derivative,
    operator_tt_derivative,
    read_field_csv,
    slope_at_tc,
    solve_fixed_point,
    solve_row,
    write_field_csv,
)
from .numerics import (
    Bracket,
    BracketError,
    ConvergenceError,
    EvaluationError,
    QuadratureRule,
    composite_gauss_legendre,
    find_root,
    gauss_legendre,
    integrate,
    maximize_scalar,
)
from .potentials import (
    HypothesisError,
    HypothesisReport,
    ModelParams,
    Potential,
    check_smallness,
    compute_t0,
    constant_potential,
    load_table_csv,
    polynomial_potential,
    potential_from_callable,
    scan_bounds,
    separable_potential,
    slope_bound,
    table_potential,
)
from .thermodynamics import (
    DegenerateFitError,
    NearTcFit,
    NoTransitionError,
    ThermoCurve,
    critical_temperature,
    near_tc_fit,
    normal_specific_heat,
    omega_difference,
    spectral_radius,
    sqrt_exponent,
    thermo_curves,
    write_thermo_csv,
)

__version__ = "0.1.0"
