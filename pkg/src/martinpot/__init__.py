"""martinpot: potential theory of killed Levy processes, numerically.

Closed-form kernels on balls, exact walk-on-spheres simulation,
accessibility tests for boundary points and infinity, Martin-kernel
estimation by Green ratios, and statistical minimal-thinness verdicts.
"""

from .closed_forms import (
    BallSpec,
    ball_expected_exit,
    ball_green,
    ball_martin_kernel,
    ball_poisson_kernel,
    exit_time_constant,
    green_constant,
    poisson_constant,
    poisson_normalization,
    poisson_radial_tail,
    riesz_constant,
    riesz_green,
)
from .geometry import (
    Ball,
    Complement,
    Domain,
    Halfspace,
    Intersection,
    LogPowerProfile,
    PowerProfile,
    TableProfile,
    Thorn,
    Union,
    annulus_part,
    domain_from_dict,
    domain_from_json,
    kappa_fat_at,
    kappa_fat_at_infinity,
    profile_from_dict,
    truncate_inside,
    truncate_outside,
)
from .process import (
    ProcessSpec,
    check_scaling,
    levy_density_asymptotic,
    make_geometric_stable,
    make_stable,
    spec_from_json,
    stable_levy_constant,
)
from .simulation import (
    Estimate,
    RngStream,
    estimate_exit_time,
    estimate_green,
    estimate_harmonic_measure,
    estimate_hit_value,
    estimate_poisson_kernel,
    exit_samples,
    green_samples_multi,
    path_step,
    sample_ball_exit,
    sample_one_sided_stable,
    wos_exit,
)
from .accessibility import (
    AccessVerdict,
    DivergenceReport,
    classify,
    finite_point_test,
    growth_probe,
    infinity_test,
    locate_thorn_flip,
    thorn_finite_test,
    thorn_infinity_test,
)
from .martin import (
    MartinEstimate,
    Schedule,
    contraction_schedule,
    estimate_martin_kernel,
    factorization_residual,
    harmonicity_check,
    lambda_functional,
    oscillation_range,
)
from .thinness import (
    ThinnessReport,
    estimate_reduced,
    locality_experiment,
    reduction_identity_check,
    thinness_test,
)

__version__ = "0.1.0"

__all__ = [
    "AccessVerdict",
    "Ball",
    "BallSpec",
    "Complement",
    "DivergenceReport",
    "Domain",
    "Estimate",
    "Halfspace",
    "Intersection",
    "LogPowerProfile",
    "MartinEstimate",
    "PowerProfile",
    "ProcessSpec",
    "RngStream",
    "Schedule",
    "TableProfile",
    "ThinnessReport",
    "Thorn",
    "Union",
    "annulus_part",
    "ball_expected_exit",
    "ball_green",
    "ball_martin_kernel",
    "ball_poisson_kernel",
    "check_scaling",
    "classify",
    "contraction_schedule",
    "domain_from_dict",
    "domain_from_json",
    "estimate_exit_time",
    "estimate_green",
    "estimate_harmonic_measure",
    "estimate_hit_value",
    "estimate_martin_kernel",
    "estimate_poisson_kernel",
    "estimate_reduced",
    "exit_samples",
    "exit_time_constant",
    "factorization_residual",
    "finite_point_test",
    "green_constant",
    "green_samples_multi",
    "growth_probe",
    "harmonicity_check",
    "infinity_test",
    "kappa_fat_at",
    "kappa_fat_at_infinity",
    "lambda_functional",
    "levy_density_asymptotic",
    "locality_experiment",
    "locate_thorn_flip",
    "make_geometric_stable",
    "make_stable",
    "oscillation_range",
    "path_step",
    "poisson_constant",
    "poisson_normalization",
    "poisson_radial_tail",
    "profile_from_dict",
    "reduction_identity_check",
    "riesz_constant",
    "riesz_green",
    "sample_ball_exit",
    "sample_one_sided_stable",
    "spec_from_json",
    "stable_levy_constant",
    "thinness_test",
    "thorn_finite_test",
    "thorn_infinity_test",
    "truncate_inside",
    "truncate_outside",
    "wos_exit",
]
