"""Error exponents, simulation and bounds for multi-class source-channel coding."""

from .channel_core import (
    DMC,
    BiAwgn,
    e0,
    e0_concave_hull,
    e0_max,
    mutual_information,
    optimal_input,
    random_coding_exponent,
)
from .exponent_bounds import (
    ExponentResult,
    joint_exponent,
    joint_hull_exponent,
    optimize_thm1,
    optimize_thm2,
    separate_exponent,
    thm1_exponent,
    thm2_exponent,
)
from .mc_codec import CodecConfig, LinearCode, SimResult, simulate_fer
from .partition import PartitionSpec
from .source_core import DiscreteSource, ebn0_to_esn0, entropy, gallager_source_fn, source_reliability
from .sp_bound import cone_error_prob, cone_half_angle, two_class_lower_bound

__version__ = "0.1.0"
