import numpy as np
import pytest
import torch

from coad.config import Config


@pytest.fixture
def tiny_cfg():
    return Config(variant="vit-cm-dwt", input_size=16, patch_size=4, concept_dim=8, heads=2, ff_width=32, batch_size=4, epochs=2, lr=1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)


def grad_norm(modules) -> float:
    total = 0.0
    for m in modules:
        for p in m.parameters():
            if p.grad is not None:
                total += float(p.grad.pow(2).sum())
    return total**0.5


@pytest.fixture(scope="session")
def synthetic_run(tmp_path_factory):
    """ViT-CM-DWT trained at 64x64 on the 12-class synthetic set with the default recipe.

    Shared by the integration, CLI and acceptance tests; trains once per session.
    """
    import time

    from coad.harness.synthetic import write_dataset
    from coad.harness.dataset import DatasetIndex
    from coad.model import train

    root = tmp_path_factory.mktemp("synthetic")
    train_manifest = write_dataset(root / "train", per_class=50, size=64, seed=0)
    eval_manifest = write_dataset(root / "eval", per_class=20, size=64, seed=1)
    cfg = Config(variant="vit-cm-dwt", input_size=64, seed=0)
    index = DatasetIndex.from_manifest(train_manifest)
    images = torch.from_numpy(index.load_many([r.id for r in index.records], 64))
    start = time.perf_counter()
    ckpt = train(images, cfg)
    elapsed = time.perf_counter() - start
    path = ckpt.save(root / "vit-cm-dwt.pt")
    return {
        "checkpoint": path,
        "model": ckpt.model,
        "ckpt": ckpt,
        "train_manifest": train_manifest,
        "eval_manifest": eval_manifest,
        "train_seconds": elapsed,
        "num_train_images": len(images),
    }


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one summary line per acceptance criterion."""

    def record(name: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
