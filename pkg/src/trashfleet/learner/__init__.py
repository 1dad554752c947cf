"""Dueling double deep Q-learning with prioritized replay, one network per team."""

from .agent import DQNPolicy, Team, load_checkpoint, save_checkpoint
from .dqn import behavior_action, q_values, td_target, train_step
from .network import DuelingQNetwork, NetSpec
from .replay import BufferUnderfilledError, PrioritizedReplayBuffer, SumTree
from .trainer import TrainerConfig, Trainer, train
