"""HTTP denoiser service speaking the sampling engine's wire protocol."""

from .app import create_app
from .models import MODEL_REGISTRY, ServiceConfig, ToyLatentModel, build_model

__version__ = "0.1.0"

__all__ = [
    "MODEL_REGISTRY",
    "ServiceConfig",
    "ToyLatentModel",
    "build_model",
    "create_app",
]
