"""Thermodynamics of open quantum systems through effective mean-force Hamiltonians."""

from .dynamics import (
    Commutation,
    DrivenHamiltonianSpec,
    Eq18Mode,
    JointInitialState,
    OpenSystem,
    ReducedTrajectory,
    ThermoRecord,
    classify_commutation,
    driven_effective_hamiltonian,
    effective_hamiltonian_t,
    evolve_joint_exact,
    integrate_projection,
    propagate_env_commuting,
    thermo_t,
    thermodynamic_trajectory,
    work_and_heat,
)
from .gibbs import (
    EffectiveHamiltonian,
    GibbsState,
    StationaryThermo,
    asymptotic_thermo,
    effective_density,
    gibbs_state,
    mean_force_hamiltonian,
    partition_function,
    relative_entropy,
    second_law_slack,
    stationary_thermo,
)
from .jaynes_cummings import JCParams, jc_density_trajectory, jc_thermo
from .operators import TensorSpace, partial_trace_env, tensor_product

__version__ = "0.1.0"
