"""Differentiable n-body dynamics and trajectory learning.

Exact Newtonian three-body ground truth, fixed-step RK4 with reverse-mode
differentiation through the unrolled steps, Neural ODE and UDE models,
two-stage training, and the forecasting-breakdown-point experiment
harness.
"""

from .dynamics import (
    BodySpec,
    COINCIDENCE_EPS,
    as_state,
    gravitational_rhs,
    pairwise_true_interaction,
    split_state,
    total_energy,
)
from .errors import (
    CoincidentBodies,
    ConfigError,
    DimensionMismatch,
    Diverged,
    EmptyTrain,
    GravlearnError,
    GridMismatch,
    NonFiniteState,
    StepSizeUnderflow,
)
from .integrators import (
    TimeGrid,
    Trajectory,
    integrate_adaptive,
    integrate_fixed,
    rk4_step,
)
from .neural import (
    ACTIVATIONS,
    MLPSpec,
    init_params,
    mlp_backward,
    mlp_forward,
    unpack_params,
)
from .models import (
    DEFAULT_SUBSTEPS,
    KIND_NODE,
    KIND_UDE,
    ModelKind,
    extract_interaction,
    interaction_sum_rhs,
    load_checkpoint,
    loss_and_gradient,
    loss_gradient,
    model_rhs,
    node_model,
    node_rhs,
    predict,
    rhs_function,
    save_checkpoint,
    trajectory_loss,
    ude_model,
    ude_rhs,
)
from .optimizers import (
    AdamState,
    BFGSResult,
    Stage1Config,
    Stage2Config,
    TrainConfig,
    TrainResult,
    adam_init,
    adam_step,
    adamw_step,
    bfgs_minimize,
    node_default_config,
    train,
    ude_default_config,
)
from .datagen import (
    DEFAULT_N_POINTS,
    DEFAULT_T_SPAN,
    FIGURE_EIGHT_PERIOD,
    NoiseLevel,
    SplitSpec,
    add_noise,
    component_ranges,
    energy_drift,
    figure_eight_spec,
    figure_eight_state,
    generate_ground_truth,
    read_trajectory_csv,
    split_prefix,
    write_trajectory_csv,
)
from .experiments import (
    BreakdownReport,
    CaseConfig,
    CaseResult,
    DataBundle,
    DEFAULT_FRACTION_GRID,
    Metrics,
    breakdown_point,
    forecast_metrics,
    run_case,
)

__version__ = "0.1.0"
