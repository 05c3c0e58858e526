from .base import Environment, EpisodeOverError, Observation, substream
from .bandit import BanditEnv, BanditSpec, MultiBandit, MultiBanditSpec, multibandit_step
from .keytodoor import ACTIONS, CHANNELS, KeyToDoorEnv, KeyToDoorSpec
from .interleaving import TASK_REWARDS, InterleavingEnv, InterleavingSpec
from .catalog import env_suite_catalog, make_env, make_spec
from .scripted import bfs_action, run_scripted_episode
