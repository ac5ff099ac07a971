"""Mixture cure models with a logistic incidence and a kernel-inverted latency."""

from .data import (
    SimulationConfig,
    SurvivalDataset,
    design,
    load_csv,
    simulate,
    true_latency_quantile,
    truncation_point,
    write_csv,
)
from .exceptions import (
    BootstrapUnstable,
    CsvFormatError,
    EmptyNeighborhood,
    NoFeasibleBandwidth,
    RiskSetZero,
    SeparationError,
)
from .inversion import (
    HazardMeasure,
    censoring_survival,
    latency_distribution,
    latency_quantile,
    latency_survival,
    product_integral,
)
from .kernels import (
    KernelSpec,
    StepFunction,
    cv_bandwidth,
    estimate_subdistribution,
    estimate_subdistributions,
    fixed_bandwidth,
    kernel_eval,
)
from .likelihood import (
    CureLink,
    FitResult,
    Likelihood,
    ParamBox,
    fit,
    init_stage1,
    init_stage2,
    loglik,
    score,
)
from .resampling import (
    BandwidthRule,
    BootstrapResult,
    McCell,
    McReport,
    bootstrap,
    qq_correlation,
    qq_data,
    run_mc,
)

__version__ = "0.1.0"
