"""Backbone: VGG19 truncated after its first 4096-wide fully connected layer.

Features are taken after the activation, so every coordinate is nonnegative
and the width is exactly 4096.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import torch
from torch import nn
from torchvision.models import vgg19

from .errors import ExtractionError

LAYER_NAME = "classifier.0 (post-ReLU)"
FEATURE_DIM = 4096


class FeatureBackbone(nn.Module):
    """Convolutional stack plus the first classifier linear and its ReLU."""

    def __init__(self, base: nn.Module):
        super().__init__()
        first = base.classifier[0]
        if getattr(first, "out_features", None) != FEATURE_DIM:
            raise ExtractionError(
                f"first classifier layer is {getattr(first, 'out_features', '?')} wide, "
                f"need {FEATURE_DIM}"
            )
        self.features = base.features
        self.avgpool = base.avgpool
        self.head = nn.Sequential(base.classifier[0], base.classifier[1])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.features(x)
        x = self.avgpool(x)
        x = torch.flatten(x, 1)
        return self.head(x)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _cached_checkpoint_sha256(weights_enum) -> str | None:
    # torchvision caches downloads under the hub dir; hash the file if present
    from torch.hub import get_dir

    path = Path(get_dir()) / "checkpoints" / Path(weights_enum.url).name
    return _sha256(path) if path.is_file() else None


def load_backbone(weights: str = "pretrained", seed: int = 0):
    """Build the truncated network in eval mode.

    ``weights`` selects the parameter source: ``"pretrained"`` fetches the
    canonical ImageNet checkpoint (network access required, one retry on
    failure), ``"random"`` builds a seeded untrained copy for plumbing tests,
    and anything else is read as a path to a saved state dict.

    Returns ``(model, info)`` where ``info`` describes the weights for the
    metadata sidecar.
    """
    if weights == "pretrained":
        from torchvision.models import VGG19_Weights

        weights_enum = VGG19_Weights.IMAGENET1K_V1
        last = None
        for _ in range(2):
            try:
                base = vgg19(weights=weights_enum)
                last = None
                break
            except Exception as exc:  # noqa: BLE001 - any fetch failure ends the run
                last = exc
        if last is not None:
            raise ExtractionError(
                f"could not obtain pretrained weights after retry: {last}"
            ) from last
        info = {"source": "imagenet", "sha256": _cached_checkpoint_sha256(weights_enum)}
    elif weights == "random":
        torch.manual_seed(seed)
        base = vgg19(weights=None)
        info = {"source": "random-init", "seed": seed, "sha256": None}
    else:
        path = Path(weights)
        if not path.is_file():
            raise ExtractionError(f"weights file not found: {path}")
        base = vgg19(weights=None)
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
            base.load_state_dict(state)
        except Exception as exc:
            raise ExtractionError(f"could not load weights from {path}: {exc}") from exc
        info = {"source": str(path), "sha256": _sha256(path)}

    model = FeatureBackbone(base)
    model.eval()
    for parameter in model.parameters():
        parameter.requires_grad_(False)
    return model, info
