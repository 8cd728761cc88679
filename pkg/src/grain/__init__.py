"""Granularity-adaptive graph node classification.

A continuous per-node hop count, learned by a twin-critic deterministic
policy-gradient agent, drives a multi-view aggregator that blends coarse and
fine neighborhood averages with fractional longer-range terms.
"""

from .config import ConfigError, TrainConfig, load_config
from .dataset import LabeledDataset, stratified_splits
from .env import FitnessEvaluator, GraphEnv, RewardConfig, compute_reward
from .graph import (CsrGraph, GraphError, PropagationCache, build_graph,
                    build_propagation_cache, edge_homophily,
                    khop_neighborhood, normalize_adjacency)
from .models import (ActionVector, BaselineModel, GranularModel, fit_and_score,
                     granular_combine, reference_aggregate)
from .optim import Adam, AdamState, adam_step
from .rng import SeededRng
from .synth import SynthConfig, generate_synthetic
from .td3 import (ActorNet, CriticPair, ReplayBuffer, Td3Agent, Td3Config,
                  compute_target, load_checkpoint, save_checkpoint, select_action,
                  td3_update)
from .tensor import Tape, Tensor
from .trainer import (derive_actions, emit_report, read_report, run_baselines,
                      run_full, run_gnn_phase, run_rl_phase)

__version__ = "0.1.0"
