import pytest
import torch
from torch.utils.data import Dataset


class TensorImageSet(Dataset):
    """Deterministic stand-in for an image dataset.

    Items look exactly like torchvision's (tensor, int target) pairs, so the
    extraction path can be exercised without any downloads.
    """

    def __init__(self, n, label_cycle=2, seed=9, size=224):
        generator = torch.Generator().manual_seed(seed)
        self.images = torch.randn(n, 3, size, size, generator=generator)
        self.targets = [i % label_cycle for i in range(n)]

    def __len__(self):
        return len(self.targets)

    def __getitem__(self, index):
        return self.images[index], self.targets[index]


@pytest.fixture(scope="session")
def random_backbone():
    # Building VGG19 takes a couple of seconds; share one instance.
    from ocmst_extractor import load_backbone

    model, info = load_backbone("random", seed=0)
    return model, info
