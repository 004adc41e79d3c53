"""Construction, local-time estimation, kernel quadrature, and statistical
verification for skew Brownian motion with time-dependent skewness."""

from .alpha import (
    AlphaStep,
    discretize_alpha,
    format_alpha_inline,
    load_alpha_csv,
    parse_alpha_inline,
    save_alpha_csv,
    shift_alpha,
)
from .construct import (
    SigmaDecomposition,
    SignAssignment,
    assign_signs,
    balayage_residual,
    construct_isbm,
    draw_signs,
    sde_residual,
    skew_identity_residual,
    unfold_submartingale,
)
from .excursions import Excursion, ExcursionSet, decompose_excursions
from .kernel import (
    KernelQuery,
    QuadratureError,
    chapman_kolmogorov_residual,
    conditional_mean,
    constant_alpha_density,
    density_normalization,
    density_on_grid,
    transition_density,
    transition_density_with_error,
)
from .localtime import (
    CalibrationError,
    LocalTimeCurve,
    count_upcrossings,
    local_time_occupation,
    local_time_upcrossing,
)
from .paths import (
    RngSpec,
    SamplePath,
    TimeGrid,
    make_grid,
    quadratic_variation,
    read_path_csv,
    simulate_bm,
    stieltjes_integral,
    write_path_csv,
    write_paths_csv,
)
from .verify import (
    ExperimentReport,
    ks_statistic,
    local_time_calibration_test,
    marginal_vs_kernel_test,
    martingale_identity_test,
    moment_scaling_test,
    pathwise_identity_test,
    reflection_law_test,
    run_suite,
    stability_experiment,
    uniqueness_probe,
)

__version__ = "0.1.0"
