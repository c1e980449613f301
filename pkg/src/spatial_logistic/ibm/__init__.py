"""Individual-based simulator and moment estimators."""
from .configuration import PointConfiguration  # noqa: F401
from .estimators import MomentEstimate, box_pair_statistics, run_replicates, shell_volumes  # noqa: F401
from .simulator import Event, Simulator, replicate_rng, run_single, scaled_params, step_gillespie  # noqa: F401
