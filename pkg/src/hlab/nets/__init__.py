from .layers import Linear, LstmCell, Mlp, glorot
from .core import AgentCore, AgentCoreConfig, PolicyOutput, agent_step, encode_observation
from .hindsight import (
    HindsightConfig,
    HindsightCriticHead,
    HindsightNet,
    HindsightValueHead,
    hindsight_forward,
    hindsight_value,
)
from .classifier import ClassifierNet, classify_action
