"""3D variable-height inverted pendulum toolkit.

Exact 0-step capturability tests for fixed and variable center of pressure,
generalized DCM / critical-ballistic-point motion decomposition, global
push-recovery feedback laws, and a deterministic scenario simulator.
"""

__version__ = "0.1.0"

from .capturability import (
    ABOVE_TRAJECTORY,
    BEHIND_PUSH,
    BOUNDED_SHIFT,
    MISSES_LINE,
    CaptureAssessment,
    FixedCopDiagnostics,
    SeparationCertificate,
    assess_zero_step,
    certificate_monitor,
    fixed_cop_capture_segment,
    fixed_cop_diagnostics,
    separation_certificate,
    sweep_admissible_policies,
)
from .control import (
    ControllerConfig,
    OrbitalEnergyTerms,
    PlanarReduction,
    bounded_stiffness,
    cop_command,
    fixed_cop_control,
    normalized_orbital_energy,
    orbital_energy_stiffness,
    planar_reduction,
)
from .core import (
    AugmentedState,
    CaptureTarget,
    ControlInput,
    PendulumState,
    PhysicalConstants,
    augmented_derivative,
    com_acceleration,
    ground_reaction_force,
    planar_angular_momentum,
    stiffness_from_force,
)
from .decomposition import (
    DecompositionView,
    InitializationBounds,
    SubsystemDerivatives,
    cbp_valid,
    decompose,
    equilibrium_virtual_time,
    initialize_virtual_time,
    reinitialize_after_push,
    subsystem_derivatives,
)
from .errors import (
    ControllerDomainError,
    DegenerateStateError,
    InfeasibleCbpError,
    NoValidVirtualTimeError,
    NotCapturableError,
    NumericalBlowupError,
    ScenarioError,
    SingularStateError,
    UnsupportedOrientationError,
    VhipError,
)
from .geometry import (
    ContactSurface,
    FootFrame,
    TauWindow,
    ballistic_point,
    foot_frame,
    icc_point,
    idc_point,
    support_hull,
    tau_window,
)
from .scenario_io import (
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from .simulation import (
    ConvergenceCriteria,
    Event,
    Push,
    Scenario,
    TrajectoryLog,
    apply_push,
    run,
    step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
