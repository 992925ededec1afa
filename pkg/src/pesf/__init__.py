"""Hide AES-GCM sealed payloads in the alignment slack of 32-bit PE files."""

from .carrier import CarrierPolicy, SlackRegion, enumerate_slack
from .errors import *  # noqa: F401,F403
from .pe import PeImage, parse, serialize, validate
from .stego import (
    StegoOptions,
    diff_cover,
    hide,
    inspect,
    retract_blind,
    retract_distortion,
)

__version__ = "0.1.0"
