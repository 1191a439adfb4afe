"""Simulation and black-box training of continuously-coupled waveguide interferometers."""

from chiptrain.chip import (
    ChipGeometry,
    ChipParameters,
    ControlModel,
    GeometryError,
    InvariantError,
    apply_control,
    assemble_hamiltonian,
    build_planar_geometry,
    build_triangular_geometry,
    crosstalk_weights,
    direct_control_model,
    mesh_control_model,
    perturb_parameters,
    sample_target_parameters,
    shift_couplings,
)
from chiptrain.unitary import (
    compose_segments,
    evolve,
    fidelity,
    geodesic_path,
    random_unitary_noise,
    unitary_from_control,
    unitary_from_parameters,
)
from chiptrain.photonics import (
    InputSet,
    OutputDistribution,
    SampleCounts,
    estimate_distribution,
    sample_counts,
    select_input_set,
    single_photon_distribution,
    two_photon_distribution,
)
from chiptrain.trainer import (
    TrainerConfig,
    TrainResult,
    build_target_dataset,
    evaluate_loss,
    flag_stuck,
    generate_instance,
    intermediate_unitaries_train,
    mae_loss,
    train,
)

__version__ = "0.1.0"
