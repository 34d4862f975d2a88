"""Semi-blind mutually referenced equalizers for frequency-selective MIMO.

Simulation library and CLI: blind and semi-blind MRE solvers (full and
reduced banks), trained ZF/MMSE baselines, an adaptive pilot-count
controller, and a deterministic Monte-Carlo harness.
"""

from .adaptive import (
    AdaptiveConfig,
    AdaptiveState,
    StepRecord,
    initial_state,
    run_adaptive,
    ser_loss,
    update_pilot_count,
)
from .detection import (
    QPSK_ALPHABET,
    SerEstimate,
    Streams,
    compute_ser,
    genie_align,
    qpsk_detect,
)
from .equalizers import (
    EqMode,
    EqualizerBank,
    MreQuadratic,
    PilotNormalOps,
    apply_bank,
    blind_mre,
    blind_mre_bank,
    delay_to_transmitter_perm,
    estimate_mre_quadratic,
    mmse_equalizer,
    mre_constraint_rows,
    pilot_normal_ops,
    semi_blind_mre,
    transmitter_major_matrix,
    zf_equalizer,
)
from .errors import ConfigError, InsufficientDataError, NumericalError
from .harness import (
    ALGORITHMS,
    ExperimentResult,
    ExperimentSpec,
    GridPoint,
    ResultRow,
    SweepAxis,
    evaluate_frame,
    export,
    export_trace,
    frame_rng,
    grid_points,
    run_adaptive_experiment,
    run_frames,
    run_sweep,
    reference_config,
)
from .linalg import (
    hermitian_smallest_eigpair,
    hermitian_smallest_eigpairs,
    least_squares,
    solve_hpd,
)
from .model import (
    ChannelSet,
    Frame,
    ReceivedWindows,
    StackedChannel,
    SystemConfig,
    build_stacked_channel,
    draw_channel,
    generate_frame,
    noise_variance_from_snr,
    simulate_reception,
)

__version__ = "0.1.0"
