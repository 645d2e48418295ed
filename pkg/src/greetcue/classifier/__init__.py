"""Action classifiers: one-vs-one RBF SVM (SMO), random forest, grid search."""

from .forest import (ForestModel, load_forest, predict_forest, save_forest,
                     train_forest)
from .grid import DEFAULT_GRID, GridSearchReport, grid_search, stratified_kfold
from .svm import (PairMachine, SvmModel, kkt_residuals, load_svm, predict_svm,
                  rbf_kernel_matrix, resolve_gamma_scale, save_svm, smo_solve,
                  train_svm)

__all__ = [
    "DEFAULT_GRID",
    "ForestModel",
    "GridSearchReport",
    "PairMachine",
    "SvmModel",
    "grid_search",
    "kkt_residuals",
    "load_forest",
    "load_svm",
    "predict_forest",
    "predict_svm",
    "rbf_kernel_matrix",
    "resolve_gamma_scale",
    "save_forest",
    "save_svm",
    "smo_solve",
    "stratified_kfold",
    "train_forest",
    "train_svm",
]
