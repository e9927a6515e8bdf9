"""mzmesh: compile, perturb, and re-optimize Mach-Zehnder interferometer meshes."""

from ._version import __version__
from .unitary import (
    DeviationReport,
    UnitarityError,
    assert_unitary,
    fidelity,
    fourier_matrix,
    haar_random_unitary,
    load_matrix,
    save_matrix,
    transition_probability_deviation,
    unitarity_deviation,
)
from .mesh import (
    KINDS,
    HardwareSample,
    MeshLayout,
    MeshSettings,
    NodeId,
    NodeSetting,
    achievable_range,
    base_hardware,
    base_layout,
    internal_phase_for_reflectivity,
    layout_for,
    load_hardware,
    load_settings,
    mesh_unitary,
    mzi_power_reflectivity,
    node_block,
    sample_hardware,
    save_hardware,
    save_settings,
    square_layout,
    triangular_layout,
)
from .decompose import (
    EvaluationResult,
    clements_decompose,
    clip_to_hardware,
    decompose_clip_evaluate,
    reck_decompose,
)
from .optimize import (
    OptimizationResult,
    enhancement_ratio,
    initial_guess_redundant,
    make_objective,
    optimize_settings,
    parameter_bounds,
)
from .experiments import (
    BenchmarkRecord,
    FourierProfileRecord,
    SpatialStats,
    SweepRecord,
    fidelity_sweep,
    fourier_reflectivity_profile,
    optimization_benchmark,
    reflectivity_statistics,
    region_node_indices,
    trial_seeds,
)
