from .trajectory import HindsightAnnotation, StepRecord, Trajectory, discounted_returns
from .policy_gradient import (
    ESTIMATOR_KINDS,
    DegenerateClassifierError,
    EstimatorConfig,
    GradEstimate,
    all_action_grad,
    cca_all_action_grad,
    cca_single_action_grad,
    estimate,
    fc_all_action_grad,
    fc_single_action_grad,
    hca_grad,
    hca_return_all_action_grad,
    reinforce_grad,
)
