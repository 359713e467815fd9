from coad.model.network import (
    COLOR_NAMES,
    SUBBAND_NAMES,
    ConceptAutoEncoder,
    ConceptEmbedding,
    ViTAutoEncoder,
    build_model,
    modulate,
    to_gray,
)
from coad.model.training import (
    Checkpoint,
    TrainingDiverged,
    content_loss,
    make_optimizer,
    modulated_loss,
    train,
    train_step_autoencoder,
    train_step_content,
    train_step_modulated,
    write_loss_curve,
)

__all__ = [
    "COLOR_NAMES",
    "SUBBAND_NAMES",
    "Checkpoint",
    "ConceptAutoEncoder",
    "ConceptEmbedding",
    "TrainingDiverged",
    "ViTAutoEncoder",
    "build_model",
    "content_loss",
    "make_optimizer",
    "modulate",
    "modulated_loss",
    "to_gray",
    "train",
    "train_step_autoencoder",
    "train_step_content",
    "train_step_modulated",
    "write_loss_curve",
]
