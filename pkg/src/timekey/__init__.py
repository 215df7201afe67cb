"""Software laboratory for tunneling-timer key distribution.

Self-powered tunneling timers drift along a shared analog trajectory;
quantizing a timer's current at an agreed time yields one secret bit that
a server can recompute from fabrication records.  This package models the
timers, the one-time-read chipsets built from them, the two key-exchange
protocols on top, and the randomness, noise and adversary studies around
them.
"""

from .timer_model import (
    AdcConfig,
    DEFAULT_RANGES,
    ParamRanges,
    PhysicalParams,
    TimerParams,
    bit_at,
    bits_array,
    current_array,
    current_at,
    floating_gate_voltage,
    params_from_physical,
    quantize,
    sample_random_params,
)
from .chipset import (
    Chipset,
    HASH_ADC_BITS,
    NoiseConfig,
    OneTimeReadError,
    ReadReceipt,
    TamperError,
    fabricate,
)
from .ecc import (
    CrcConfig,
    EccError,
    ReconcileFailure,
    Remainder,
    SearchBudgetExceeded,
    crc,
    effective_key,
    minimum_distance_scan,
    reconcile,
    security_reduction,
)
from .protocol import (
    AuthenticationError,
    DeltaTConfig,
    ExchangeOutcome,
    KeyRequest,
    KeyString,
    PublicChannel,
    ReplayError,
    ServerRegistry,
    Session,
    SimClock,
    StreamAuthCipher,
    UnknownChipsetError,
    combine_keys,
    exchange_between_users,
    exchange_server_user,
    user_generate,
)
from .randomness import (
    BATTERY,
    TestReport,
    TestResult,
    block_frequency_p,
    cumulative_sums_p,
    longest_run_p,
    monobit_p,
    pass_percentage_sweep,
    prng_baseline,
    run_battery,
    runs_p,
)
from .analysis import (
    AttackOutcome,
    SearchSpaceReport,
    bit_mismatch_sweep,
    eavesdrop_attack,
    generate_key_batch,
    noise_failure_study,
    sampling_reduction,
    search_space,
    shannon_entropy,
    snr_db_to_linear,
)
from .config import ConfigError, Settings

__version__ = "0.1.0"

__all__ = [
    "AdcConfig", "DEFAULT_RANGES", "ParamRanges", "PhysicalParams",
    "TimerParams", "bit_at", "bits_array", "current_array", "current_at",
    "floating_gate_voltage", "params_from_physical", "quantize",
    "sample_random_params",
    "Chipset", "HASH_ADC_BITS", "NoiseConfig", "OneTimeReadError",
    "ReadReceipt", "TamperError", "fabricate",
    "CrcConfig", "EccError", "ReconcileFailure", "Remainder",
    "SearchBudgetExceeded", "crc", "effective_key", "minimum_distance_scan",
    "reconcile", "security_reduction",
    "AuthenticationError", "DeltaTConfig", "ExchangeOutcome", "KeyRequest",
    "KeyString", "PublicChannel", "ReplayError", "ServerRegistry", "Session",
    "SimClock", "StreamAuthCipher", "UnknownChipsetError", "combine_keys",
    "exchange_between_users", "exchange_server_user", "user_generate",
    "BATTERY", "TestReport", "TestResult", "block_frequency_p",
    "cumulative_sums_p", "longest_run_p", "monobit_p",
    "pass_percentage_sweep", "prng_baseline", "run_battery", "runs_p",
    "AttackOutcome", "SearchSpaceReport", "bit_mismatch_sweep",
    "eavesdrop_attack", "generate_key_batch", "noise_failure_study",
    "sampling_reduction", "search_space", "shannon_entropy",
    "snr_db_to_linear",
    "ConfigError", "Settings",
    "__version__",
]
