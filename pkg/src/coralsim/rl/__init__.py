"""Actor-critic learning: PPO, SAC and independent PPO over CoralEnv."""

from .buffers import ReplayBuffer, RolloutBuffer, RunningMeanStd
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .distributions import (PolicySample, deterministic_action, gaussian_entropy,
                            log_prob, sample_policy)
from .gae import compute_gae
from .networks import (NetworkConfig, PolicyNetwork, QNetwork, ValueNetwork,
                       copy_params, polyak_update)
from .ppo import ppo_update
from .sac import SACParams, sac_update
from .train_config import TrainConfig
from .trainers import (EpisodeRecord, PPOLearner, PPOTrainer, SACTrainer,
                       collect_rollouts, ippo_train)

__all__ = [
    "Checkpoint", "CheckpointError", "EpisodeRecord", "NetworkConfig",
    "PPOLearner", "PPOTrainer", "PolicyNetwork", "PolicySample", "QNetwork",
    "ReplayBuffer", "RolloutBuffer", "RunningMeanStd", "SACParams",
    "SACTrainer", "TrainConfig", "ValueNetwork", "collect_rollouts",
    "compute_gae", "copy_params", "deterministic_action", "gaussian_entropy",
    "ippo_train", "load_checkpoint", "log_prob", "polyak_update", "ppo_update",
    "sac_update", "sample_policy", "save_checkpoint",
]
