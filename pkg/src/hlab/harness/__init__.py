from .config import ConfigError, ExperimentConfig
from .builder import build_agent
from .rollout import RolloutResult, collect_batch, domain_metrics, record_golden_trace
from .training import TrainingDiverged, run_experiment, run_seed
from .aggregate import aggregate_seeds, read_metrics
from .plots import emit_plots
