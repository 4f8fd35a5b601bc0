"""Monte Carlo workbench for two-photon polarization-correlation experiments.

Simulates idealized entangled-pair experiments under four competing physical
hypotheses (formal state-vector reduction, local hidden variables, definite
circular polarization at emission, and a no-definite-value narrative with
instantaneous collapse) and compares their predictions, including the
wave-plate chain experiment that tells them apart.
"""

from ._version import __version__
from .engine import (
    FixedSettings,
    Geometry,
    QwpChainProtocol,
    RandomizedSettings,
    RunConfig,
    TwoChannelProtocol,
    run_experiment,
    run_malus,
    trial_draws,
    trial_stream,
)
from .models import (
    DefiniteCircular,
    HypothesisModel,
    Lhv,
    LhvModel,
    NdvNonlocal,
    Ordering,
    QMFormal,
    RAnalyzer,
    TrialDraws,
    definite_circular_as_lhv,
    deterministic_sign_model,
    lhv_correlation,
    lhv_joint_probabilities,
    malus_response_model,
)
from .polarization import (
    ABSORBED,
    AnalyzerChannel,
    Channel,
    Frame,
    Handedness,
    JonesVector,
    LinearPolarizer,
    NormalizationError,
    QuarterWavePlate,
    apply,
    circular,
    jones_matrix,
    linear,
    phase_insensitive_equals,
)
from .stats import (
    ChainCounts,
    ChshReport,
    CoincidenceCounts,
    PairEstimate,
    chsh_report,
    conditional_detection,
    estimate_correlation,
    order_invariance_test,
)
from .twophoton import (
    Arm,
    ChannelOutcome,
    JointProbabilities,
    TwoPhotonState,
    circular_entangled,
    joint_probabilities,
    joint_probabilities_sequential,
    linear_entangled,
    measure_arm,
    measure_arm_chain,
)

__all__ = [name for name in dir() if not name.startswith("_")]
