"""Coded caching for nonuniform file popularities.

Two centralized strategies over K users and N grouped files:

* ``beta`` keeps one sub-packetization for every file while caching the
  popular groups more, so delivery can XOR pieces across groups;
* ``alpha`` is the grouping baseline that serves each group with the
  classic single-group scheme and ignores cross-group coding.

The package provides the chain combinatorics behind the placement, both
placements, GF(2)-verified XOR delivery schedules (tabulated, greedy, and
exhaustive), and exact / Monte Carlo expected-rate analysis including the
memory-rate envelope.
"""

from .combinatorics import (
    MAX_ENUMERATION,
    SubfileIndex,
    check_index,
    check_r_vector,
    enumerate_indices,
    index_rank,
    index_unrank,
    subpacketization,
)
from .delivery import (
    SCHEDULERS,
    Certificate,
    DecodeReport,
    DeliveryMessage,
    DeliverySchedule,
    decodable,
    exhaustive_schedule,
    greedy_schedule,
    make_schedule,
    message_text,
    needed_map,
    permute_schedule,
    schedule_from_json,
    schedule_text,
    schedule_to_json,
    toy_cache,
    toy_schedule,
)
from .errors import (
    BudgetExceededError,
    CodedCacheError,
    LimitExceededError,
    UnsupportedConfigError,
    ValidationError,
)
from .placement import (
    CacheState,
    Group,
    PlacementConfig,
    cache_from_json,
    cache_to_json,
    config_from_json,
    config_to_json,
    load_config,
    make_config,
    per_group_cache,
    place,
    place_alpha,
    place_beta,
    split_by_popularity,
    toy_config,
)
from .rates import (
    ABOVE,
    BOUNDARY,
    VERTEX,
    Envelope,
    MCEstimate,
    RateCurve,
    RatePoint,
    StrategyComparison,
    alpha_expected_rate,
    alpha_points,
    beta_points,
    classic_rate,
    compare_strategies,
    curves_to_json,
    default_p_grid,
    expected_rate_exact,
    expected_rate_mc,
    lower_envelope,
    memory_rate_table,
    memory_share,
    rate_alpha_closed,
    rate_beta_closed,
    write_curves_csv,
)

__version__ = "0.1.0"

__all__ = [
    "MAX_ENUMERATION",
    "SubfileIndex",
    "check_index",
    "check_r_vector",
    "enumerate_indices",
    "index_rank",
    "index_unrank",
    "subpacketization",
    "SCHEDULERS",
    "Certificate",
    "DecodeReport",
    "DeliveryMessage",
    "DeliverySchedule",
    "decodable",
    "exhaustive_schedule",
    "greedy_schedule",
    "make_schedule",
    "message_text",
    "needed_map",
    "permute_schedule",
    "schedule_from_json",
    "schedule_text",
    "schedule_to_json",
    "toy_cache",
    "toy_schedule",
    "BudgetExceededError",
    "CodedCacheError",
    "LimitExceededError",
    "UnsupportedConfigError",
    "ValidationError",
    "CacheState",
    "Group",
    "PlacementConfig",
    "cache_from_json",
    "cache_to_json",
    "config_from_json",
    "config_to_json",
    "load_config",
    "make_config",
    "per_group_cache",
    "place",
    "place_alpha",
    "place_beta",
    "split_by_popularity",
    "toy_config",
    "ABOVE",
    "BOUNDARY",
    "VERTEX",
    "Envelope",
    "MCEstimate",
    "RateCurve",
    "RatePoint",
    "StrategyComparison",
    "alpha_expected_rate",
    "alpha_points",
    "beta_points",
    "classic_rate",
    "compare_strategies",
    "curves_to_json",
    "default_p_grid",
    "expected_rate_exact",
    "expected_rate_mc",
    "lower_envelope",
    "memory_rate_table",
    "memory_share",
    "rate_alpha_closed",
    "rate_beta_closed",
    "write_curves_csv",
    "__version__",
]
