"""Open-system dynamics from infinite tensor-network contraction."""

__version__ = "0.1.0"

from .bath import (
    BathSpec,
    DiscretizedBath,
    Regularization,
    discretize,
    eval_alpha,
)
from .influence import (
    CouplingBasis,
    InfluenceGate,
    exact_influence,
    exact_influence_batch,
    gate,
    weight,
    weight_table,
)
from .itebd import InfluenceMPO, TruncationPolicy, boundary_vectors, contract, reconstruct
from .baseline import FiniteProcessMPO, contract_finite, reconstruct_finite
from .propagator import (
    Propagator,
    SpectralDecomposition,
    SystemModel,
    Trajectory,
    UnitaryChannel,
    build_Q,
    evolve,
    spectrum,
    unitary_channel,
)
from .heom import HeomPropagatorSet, HierarchySpace, heom_generator, heom_influence
from .models import (
    FitResult,
    concurrence,
    fit_algebraic,
    spin_boson,
    sweep_steady_state,
    two_spin_boson,
)
