"""Dataset loading with the preprocessing the backbone expects."""

from __future__ import annotations

from torchvision import datasets, transforms

from .errors import ExtractionError

INPUT_SIZE = 224
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

_PREPROCESSING = {
    "cifar10": "resize 224x224 bilinear, normalize to ImageNet mean/std",
    "fashion-mnist": (
        "replicate gray to 3 channels, resize 224x224 bilinear, "
        "normalize to ImageNet mean/std"
    ),
}

DATASET_NAMES = tuple(sorted(_PREPROCESSING))


def preprocessing_text(name: str) -> str:
    return _PREPROCESSING[name]


def transform_for(name: str):
    steps = []
    if name == "fashion-mnist":
        steps.append(transforms.Grayscale(num_output_channels=3))
    steps += [
        transforms.Resize((INPUT_SIZE, INPUT_SIZE)),
        transforms.ToTensor(),
        transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
    ]
    return transforms.Compose(steps)


def load_split(name: str, split: str, root, download: bool = True):
    """Return the requested torchvision dataset, retrying one fetch failure."""
    if name not in _PREPROCESSING:
        raise ExtractionError(
            f"unknown dataset {name!r}; expected one of {list(DATASET_NAMES)}"
        )
    if split not in ("train", "test"):
        raise ExtractionError(f"split must be 'train' or 'test', got {split!r}")
    factory = datasets.CIFAR10 if name == "cifar10" else datasets.FashionMNIST
    transform = transform_for(name)
    last = None
    for _ in range(2):
        try:
            return factory(
                root=str(root),
                train=(split == "train"),
                transform=transform,
                download=download,
            )
        except Exception as exc:  # noqa: BLE001 - missing data or dead network
            last = exc
    raise ExtractionError(f"could not obtain {name}/{split}: {last}") from last
