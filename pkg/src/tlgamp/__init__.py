"""Near-field XL-MIMO channel estimation with three-layer GAMP."""

__version__ = "0.1.0"

from .baselines import BASELINE_KINDS, frozen_vr_run, ls_estimate, oracle_vr_run
from .channel import (
    ArrayGeometry,
    ChannelRealization,
    MarkovPrior,
    PathParams,
    ScenarioConfig,
    VisibilityVector,
    assemble_channel,
    make_scenario,
    sample_visibility,
    steer_rx_ff,
    steer_rx_nf,
    steer_tx,
)
from .config import ConfigError, format_config, load_config, parse_config
from .frontend import (
    CombinerSet,
    NoiseModel,
    WhitenedObservation,
    beam_align_observe,
    build_dictionary,
    estimate_aods_grid,
    gen_combiners,
    noise_model,
    simulate_subframe,
    unitary_transform,
    whiten,
)
from .gamp import GampConfig, SubchannelEstimate, assemble_full_channel, run_subchannel_estimation
from .harness import ExperimentConfig, SweepResult, TrialResult, nmse, run_trial, sweep, vr_metrics
