"""Federated class-association-rule classification (duCBA) with
randomized-response local differential privacy."""
from .cba import CBAClassifier, ClientModel, RuleModel, build_classifier, classify, rank_rules
from .dataset import (
    AttributeSchema, CategoricalDataset, ChiSquareSelector, DataError, QuantileDiscretizer, SplitSpec,
    chi_square_statistic, derive_thalach_ratio, discretize, load_csv, select_features, split_and_partition,
)
from .ducba import MergedModel, merge
from .fedsim import ExperimentConfig, FederatedCBAClassifier, load_config, run_single, run_sweep
from .metrics import EvaluationReport, confusion, prf1, roc_auc
from .mining import ClassAssociationRule, Item, MiningParams, mine_cars
from .privacy import RandomizedResponse, RRChannel, RRConfig, estimate_true_frequency, perturb_dataset, perturb_value

__version__ = "0.1.0"
