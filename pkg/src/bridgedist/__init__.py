"""Adaptive Tor bridge distribution: algorithm, censor models, multi-distributor
protocols and a seeded simulator."""

from .adversary import Adversary, Aggressive, BudgetExceeded, Prudent, Stochastic, parse_strategy
from .distribution import (
    BridgeSupply,
    DuplicateUser,
    EmptyUserSet,
    RoundPlan,
    Session,
    SupplyExhausted,
    UnknownUser,
    instance_count,
    pool_size,
)
from .distributors import (
    AgreementFailure,
    BridgeRegistry,
    Commitment,
    DecentralizedDistribution,
    DistributorNode,
    DrgRound,
    LeaderBasedDistribution,
    Restart,
    Stalled,
    agreed_random,
    byzantine_agree,
    decentralized_assign,
    drg_run,
    index_from_random,
    leader_assign_round,
    make_distributors,
    register_bridge,
    user_reconstruct,
)
from .field import (
    P61,
    DecodeFailure,
    DuplicateX,
    Polynomial,
    ZeroInverse,
    berlekamp_welch_decode,
    lagrange_interpolate,
    poly_eval,
)
from .sharing import ReconstructFailure, Share, SharingPolicy, decode_address, encode_address, reconstruct, share
from .sim import (
    ConfigInvalid,
    ContractViolation,
    IoFailure,
    MetricsSeries,
    RoundRecord,
    SimConfig,
    derive_seed,
    emit_csv,
    run_experiment,
    run_trial,
)

__version__ = "0.1.0"
