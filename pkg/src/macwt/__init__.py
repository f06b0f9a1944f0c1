"""Two-user multiple access wiretap channels: exact information terms, rate regions,
key-recycling protocol simulation, desk-scale wiretap codes and block fading."""

from .channel import (
    InfoTerms,
    InputDistribution,
    MacWiretapChannel,
    entropy,
    info_terms,
    load_channel,
    mutual_information,
    noisy_xor_channel,
    product_extension,
    save_channel,
)
from .codec import (
    BinningCodebook,
    JointMLDecoder,
    LeakageReport,
    build_codebook,
    decode_joint,
    encode_keyed,
    encode_wiretap,
    exact_leakage,
)
from .exceptions import CapacityError, MacWtError, ProtocolError, ScenarioError, ShapeError
from .fading import GainModel, PowerPolicy, capacity_terms, check_power_constraint, run_fading, secrecy_increment
from .protocol import KeyBuffer, SlotConfig, SlotRates, advance_slot, init_protocol, plan_slot, run_protocol
from .regions import (
    RatePentagon,
    RateRegion,
    RateRegionEstimator,
    capacity_pentagon,
    hull_over_inputs,
    ramp_index,
    ramp_schedule,
    secrecy_pentagon,
    slot_average_rate,
)

__version__ = "0.1.0"
