"""Branch decompositions, two-time weights and real-state trajectories for
closed bipartite quantum systems."""

from .asymptotics import FtbornReport, HorizonReport, ftborn_check, horizon_sweep, match_branches
from .branching import (
    Branch,
    BranchSet,
    RealStateTrajectory,
    TwoTimeWeights,
    decompose_at,
    final_branches,
    real_state,
    real_state_trajectory,
    sample_branch,
    sample_branches,
    two_time_weights,
)
from .decomposition import (
    DecompositionSpec,
    ProjectiveDecomposition,
    SchmidtData,
    basis_decomposition,
    fourier_decomposition,
    schmidt,
    schmidt_projectors,
)
from .dynamics import HamiltonianSchedule, Propagator, eigen_propagator, propagate
from .errors import (
    ConfigError,
    DimensionError,
    InvalidStateError,
    NumericalError,
    RealBranchError,
    ScheduleError,
)
from .linalg import (
    BipartiteSpace,
    DensityMatrix,
    StateVector,
    apply_projector_B,
    inner_product,
    partial_trace_B,
    trace_distance,
)
from .models import (
    BranchTree,
    ModelSpec,
    branch_tree,
    measurement_chain,
    random_model,
    recoherence_model,
    sequential_measurements,
    static_model,
)
from .tolerances import DEFAULT, Tolerances

__version__ = "0.1.0"
