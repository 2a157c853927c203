"""Output statistics of random binning: divergences, binning experiments,
typical-set encoders, achievable-rate reports, and wiretap simulations."""

from .binning import (
    BinningMap,
    derive_seed,
    divergence_for_binning,
    expected_divergence_enum,
    expected_divergence_mc,
    expected_tsallis_exact,
    expected_tsallis_exact_iid,
    induced_joint,
    m_from_rate,
    philox_rng,
    sample_binning,
)
from .measures import (
    Channel,
    GuardError,
    JointPmf,
    Pmf,
    cond_renyi_entropy,
    conditional_entropy,
    d_infinity,
    is_singleton,
    kl_divergence,
    mutual_information,
    renyi_divergence,
    renyi_entropy,
    shannon_entropy,
    sibson_mi,
    total_variation,
    tsallis_divergence,
)
from .rates import (
    RateReport,
    dinf_one_shot_bound,
    osrb_threshold_iid,
    osrb_threshold_stochastic,
    osrb_threshold_typical,
    r_prime,
    r_prime_grid_oracle,
    secrecy_rate,
    secrecy_rate_iid_variant,
)
from .typicality import (
    JointTypicalSet,
    TypicalSet,
    joint_typical_set,
    s_kernel,
    typical_set,
)
from .wiretap import (
    SweepConfig,
    WiretapCode,
    build_code,
    decode,
    encode,
    error_prob,
    leakage,
    select_f,
    sweep_experiment,
)

__all__ = [
    "BinningMap",
    "Channel",
    "GuardError",
    "JointPmf",
    "JointTypicalSet",
    "Pmf",
    "RateReport",
    "SweepConfig",
    "TypicalSet",
    "WiretapCode",
    "build_code",
    "cond_renyi_entropy",
    "conditional_entropy",
    "d_infinity",
    "decode",
    "derive_seed",
    "dinf_one_shot_bound",
    "divergence_for_binning",
    "encode",
    "error_prob",
    "expected_divergence_enum",
    "expected_divergence_mc",
    "expected_tsallis_exact",
    "expected_tsallis_exact_iid",
    "induced_joint",
    "is_singleton",
    "joint_typical_set",
    "kl_divergence",
    "leakage",
    "m_from_rate",
    "mutual_information",
    "osrb_threshold_iid",
    "osrb_threshold_stochastic",
    "osrb_threshold_typical",
    "philox_rng",
    "r_prime",
    "r_prime_grid_oracle",
    "renyi_divergence",
    "renyi_entropy",
    "s_kernel",
    "sample_binning",
    "secrecy_rate",
    "secrecy_rate_iid_variant",
    "select_f",
    "shannon_entropy",
    "sibson_mi",
    "sweep_experiment",
    "total_variation",
    "tsallis_divergence",
    "typical_set",
]

__version__ = "0.1.0"
