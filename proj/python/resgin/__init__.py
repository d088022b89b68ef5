"""Residual graph-isomorphism network with cross-attention pooling for
drug-pair synergy prediction."""

from resgin._core import (
    Atom,
    DataError,
    Model,
    ModelError,
    Molecule,
    SmilesParseError,
    atom_features,
    classification_metrics,
    featurizer_symbols,
    kfold_split,
    neighbor_lists,
    parse_smiles,
    roc_auc,
    train_cv,
    write_toy_dataset,
)

__all__ = [
    "Atom",
    "DataError",
    "Model",
    "ModelError",
    "Molecule",
    "SmilesParseError",
    "atom_features",
    "classification_metrics",
    "featurizer_symbols",
    "kfold_split",
    "neighbor_lists",
    "parse_smiles",
    "roc_auc",
    "train_cv",
    "write_toy_dataset",
]
