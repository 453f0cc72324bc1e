"""Momentum-conserving Lagrangian neural networks for multi-particle systems.

Learns the dynamics of N-body systems purely from position trajectories by
modeling the potential as a shared network over pairwise distances, which
makes translation/rotation/permutation invariance (and hence linear and
angular momentum conservation) exact by construction. Ships with analytic
spring/gravity benchmark systems, a decoupled baseline potential network
trained on accelerations, forward-simulation evaluation, and a CLI.
"""

from .errors import (
    ConfigurationError,
    ContractViolationError,
    NumericalFailureError,
    SingularityError,
    UnsupportedOperationError,
)
from .autodiff import finite_difference_gradient, grad, nested_grad
from .nn import (
    AdamState,
    MlpParams,
    adam_init,
    adam_step,
    init_params,
    load_checkpoint,
    mlp_forward,
    save_checkpoint,
    squareplus,
)
from .lagrangian import (
    PairIndex,
    ParticleState,
    Trajectory,
    angular_momentum,
    discrete_action,
    el_acceleration_fixedke,
    el_acceleration_general,
    hamiltonian,
    kinetic_energy,
    linear_momentum,
    mclnn_acceleration_fn,
    mclnn_lagrangian,
    mclnn_potential,
    pairwise_distances,
    random_rotation,
    read_trajectory_csv,
    rollout,
    rotate,
    rotate_positions_only,
    translate,
    velocity_verlet_step,
    write_trajectory_csv,
)
from .systems import (
    DatasetConfig,
    DatasetResult,
    SystemSpec,
    analytic_accelerations,
    analytic_pair_force_magnitude,
    analytic_pair_potential,
    default_spec,
    generate_dataset,
    initial_conditions,
    perturb_initial_conditions,
    sample_acceleration_dataset,
    scaled_initial_conditions,
)
from .training import (
    TrainConfig,
    TrainReport,
    baseline_loss,
    hyperparameter_sweep,
    mclnn_loss,
    mclnn_loss_gradient,
    train_baseline,
    train_mclnn,
)
from .evaluation import (
    ConservationReport,
    PotentialCurve,
    cluster_intervals,
    evaluate_forward,
    evaluate_forward_functions,
    export_potential_curve,
    generalization_eval,
    mae,
    write_potential_curve_csv,
    write_report_csv,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
