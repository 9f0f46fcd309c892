"""Counterfactual data augmentation for languages with grammatical gender.

Swapping the gender of an animate noun breaks agreement with its
determiners, adjectives and participles.  This package models the
morpho-syntactic tags of a dependency tree as a Markov random field,
re-infers the tags that must change after an intervention, and
reinflects the affected words.
"""

from .config import load_profile
from .treebank import DepSentence, MorphTag, Token, read_conllu, write_conllu
from .model import BaselineRules, Clamp, EdgeKey, Free, LinearParams, NeuralParams, Prefer
from .inference import brute_force, build_instance, max_product, sum_product
from .training import TrainConfig, train
from .pipeline import (AnimacyGazetteer, Augmenter, augment_corpus, build_lexicon, intervene,
                       transform)
from .evaluation import bias_report, grammaticality_score, stereotype_score
from .lm import NGramLM, train_ngram

__version__ = "0.1.0"

__all__ = [
    "load_profile",
    "DepSentence", "MorphTag", "Token", "read_conllu", "write_conllu",
    "BaselineRules", "Clamp", "EdgeKey", "Free", "LinearParams", "NeuralParams", "Prefer",
    "brute_force", "build_instance", "max_product", "sum_product",
    "TrainConfig", "train",
    "AnimacyGazetteer", "Augmenter", "augment_corpus", "build_lexicon", "intervene", "transform",
    "bias_report", "grammaticality_score", "stereotype_score",
    "NGramLM", "train_ngram",
]
