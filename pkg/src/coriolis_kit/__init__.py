"""Christoffel-consistent Coriolis factorizations for rigid-body trees with cluster joints."""

from .model import ConfigState, MechanismModel, ModelError, load_model, save_model
from .spatial import SpatialInertia, SpatialTransform

__version__ = "0.1.0"
