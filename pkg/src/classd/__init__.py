"""classd: simulation and analysis of a third-order PWM class-D amplifier.

The package covers the full loop from first principles: exact event-driven
simulation of the switched system, the periodic operating point and its
stability through the period-return map, the closed-form small-signal
transfer function, the slow-time nonlinear prediction of the audio output
and its distortion, and exact Fourier analysis of the resulting pulse
trains, with and without ripple compensation.
"""

from .errors import (
    ClassDError,
    ConfigError,
    DegenerateSpectrumError,
    NoCrossingError,
    NoRootError,
    NoSignChangeError,
    PoleError,
    ResidueError,
    ResonanceError,
    SaturationError,
    SingularSystemError,
    ToleranceError,
    TransversalityError,
    WindowError,
)
from .modal import (
    ModalDecomposition,
    build_system_matrix,
    matrix_exp,
    modal_decomposition,
    p_vec,
    phi,
    q_vec,
)
from .params import REFERENCE_DESIGN, AmplifierParams
from .perturbation import (
    AudioPrediction,
    SlowInput,
    a0,
    a1,
    g1,
    pq_scalars,
    predict_audio,
    psi,
    upsilon0,
)
from .simulate import (
    InputSignal,
    PulseTrain,
    Trajectory,
    discrete_map_step,
    find_crossing,
    simulate,
    steady_state_at_carrier_edge,
)
from .smallsignal import (
    TransferPoint,
    first_order_gain_expansion,
    script_N,
    sigma,
    transfer_function,
    transfer_points,
)
from .spectral import SpectralReport, harmonic_table, mean_level, pulse_fourier, thd
from .stability import (
    StabilityReport,
    compute_kappa,
    monodromy,
    pair_eigenvalue_paths,
    stability_threshold,
    sylvester_residual,
)
from .steady import (
    SteadyState,
    duty_cycle,
    period_forcing,
    rc_shift_delta,
    reconstruct_period,
    solve_steady_state,
)

__version__ = "0.1.0"
