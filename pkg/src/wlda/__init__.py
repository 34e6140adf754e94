"""Linear discriminant analysis directly on incomplete data."""

from wlda.dataset import MaskedDataset, MissingSpec, load_csv, load_iris, simulate_mcar, stratified_split
from wlda.discriminant import WeightProfile, WldaModel, build_weight_profile, fit
from wlda.estimation import ModelParams, fit_params

__all__ = [
    "MaskedDataset",
    "MissingSpec",
    "ModelParams",
    "WeightProfile",
    "WldaModel",
    "build_weight_profile",
    "fit",
    "fit_params",
    "load_csv",
    "load_iris",
    "simulate_mcar",
    "stratified_split",
]

__version__ = "0.1.0"
