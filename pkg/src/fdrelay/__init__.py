"""Achievable rates of full-duplex MIMO decode-and-forward relays under
limited transmitter/receiver dynamic range and pilot-aided channel estimation.
"""

from .model import (
    ChannelSet,
    LinkEstimate,
    PilotMatrix,
    SystemParams,
    build_pilot,
    conditional_error_cov,
    draw_channels,
    draw_link_estimate,
    estimation_error_cov,
    ls_estimate,
    receiver_distortion_cov,
    simulate_training,
    transmitter_noise_cov,
)
from .rates import (
    CovarianceSchedule,
    EstimateBundle,
    RateReport,
    end_to_end_rate,
    estimate_links,
    noise_cov_dest,
    noise_cov_relay,
    rate_rd,
    rate_sr,
)
from .optimizer import (
    GpConfig,
    OptResult,
    SchemeId,
    bisect_zeta,
    gp_optimize,
    gradient_relay,
    gradient_source,
    nfd_schedule,
    ohd_schedule,
    optimize_scheme,
    project_constraint,
    weighted_sum_rate,
)
from .approx import (
    RegimeParams,
    approx_rate,
    approx_rate_fd,
    approx_rate_hd,
    diag_channel_rate,
    duplex_boundary,
)

__version__ = "0.1.0"
