"""fracmild: pathwise mild solutions of semilinear parabolic equations
driven by fractional noise on spectrally represented metric measure spaces.

Pipeline: build a spectral basis (interval or gasket), generate fractional
driving noise, solve the mild equation by Picard iteration with the
fractional-derivative convolution integral, and measure the time-Hölder
regularity of the solution against the admissible parameter region.
"""
from .backend import backend_name
from .errors import (
    AdmissibilityError,
    AliasingError,
    AliasingWarning,
    ConfigError,
    FracmildError,
    HolderWarning,
    JitterWarning,
    NoiseGenerationError,
    NonlinearityEvalError,
    ResourceLimitError,
    SummabilityError,
    TruncationWarning,
)
from .fracint import (
    FracDerivative,
    OperatorPath,
    convolution_integral,
    eta_invariance_defect,
    make_graded_mesh,
    rs_integral_oracle,
    wm_left,
    wm_right,
)
from .noise import (
    FbmPath,
    NoisePath,
    SeriesNoiseSpec,
    gen_fbm,
    gen_series_noise,
    holder_in_dual_norm,
    regulated,
    zero_noise,
)
from .regularity import (
    RegionDescription,
    RegularityReport,
    SlopeEstimate,
    admissible_region,
    build_report,
    holder_exponent,
    measure_lemma_bounds,
    uniform_bound,
    wgamma_seminorm,
)
from .solver import (
    MildSolution,
    Nonlinearity,
    ScalarFunc,
    apply_nonlinearity,
    deterministic_convolution,
    solve_mild,
    solve_with_fractional_dissipation,
)
from .spaces import (
    Field,
    ParamSet,
    TimePath,
    bessel_potential,
    fractional_power_apply,
    mode_field,
    norm_H,
    norm_H_inf,
    norm_spectral,
    pointwise_product,
    product_estimate_constant,
    project_nodal,
    semigroup_apply,
    subordinated_apply,
    verify_semigroup_estimates,
)
from .spectral import (
    HeatKernelModel,
    SpectralBasis,
    build_gasket_basis,
    build_interval_basis,
    default_kernel_time_grid,
    fit_hke_bounds,
    heat_kernel,
    heat_kernel_row,
    heat_trace_density,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
