"""Generative transition-based dependency parser and syntactic language model."""

from .corpus import Vocabulary, build_vocab, encode, read_conll
from .decoder import DecodeSettings, generate, marginal_log_prob, particle_parse, selection_step
from .hpyp import HpypTree, Hyperparams
from .model import ContextSpec, Derivation, GenerativeModel, default_specs
from .trainer import TrainSettings, UnsupSettings, train_supervised, train_unsupervised

__all__ = [
    "ContextSpec",
    "DecodeSettings",
    "Derivation",
    "GenerativeModel",
    "HpypTree",
    "Hyperparams",
    "TrainSettings",
    "UnsupSettings",
    "Vocabulary",
    "build_vocab",
    "default_specs",
    "encode",
    "generate",
    "marginal_log_prob",
    "particle_parse",
    "read_conll",
    "selection_step",
    "train_supervised",
    "train_unsupervised",
]
