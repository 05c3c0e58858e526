from .mdp import RewardNoise, TabularMdp, TabularPolicy, fixture_names, load_fixture
from .exact import (
    EnumTraj,
    EnumerationLimitError,
    ExactTables,
    ExpectationReport,
    RETURN_KEY_DECIMALS,
    advantage_second_moments,
    enumerate_trajectories,
    estimator_expectation,
    exact_gradient,
    exact_values,
    expected_return,
    return_posteriors,
    sample_episodes,
    state_posteriors,
    to_trajectory,
)
from .phi import (
    make_phi_return,
    phi_action,
    phi_constant,
    phi_everything,
    phi_future_state,
    phi_future_states_and_noise,
    phi_noise,
)
