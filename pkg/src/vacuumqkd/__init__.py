"""Vacuum-entanglement CV-QKD: conformal detector correlations, Gaussian key rates and a protocol simulator."""

from .correlations import (
    CorrelationRecord,
    Method,
    QuadratureSpec,
    correlation_record,
    cross_correlation_exact,
    fig1_sweep,
    normalization_constant,
    preset_pair,
    signal_variance_approx,
    signal_variance_exact,
    squeezing_approx,
)
from .field import DetectorParams, Label, PairingError, bogolyubov, make_pair
from .gaussian import (
    ChannelParams,
    KeyRateResult,
    TwoModeCovariance,
    UnphysicalError,
    cm_from_correlations,
    effective_gain,
    epr_correlation,
    epr_covariance,
    key_rate,
    lossy_correlation,
    symplectic_eigenvalues,
)
from .labframe import ChirpSchedule, chirp_profile, table1
from .protocol import (
    ProtocolConfig,
    Transcript,
    estimate_channel,
    homodyne_gaussian_check,
    run_protocol,
    sample_quadratures,
)

__version__ = "0.1.0"
