from .losses import (
    EpisodeBatch,
    LiveAnnotation,
    LossBreakdown,
    LossWeights,
    classifier_loss,
    hindsight_baseline_loss,
    im_loss_kl,
    im_loss_mi,
    policy_entropy,
)
from .geco import constraint_target, geco_update
from .pipeline import AgentNets, EpisodeArrays, build_annotation, unroll_core
from .update import composite_update, pg_surrogate_loss
