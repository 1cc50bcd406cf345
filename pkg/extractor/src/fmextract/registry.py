"""Documented registry of extractable vision models.

Each entry records the embedding dimensionality produced under its
default pooling, the model's native input resolution, and which pooling
modes its architecture supports. ``tiny-patch4`` is a frozen
random-projection patch encoder bundled with the package so that one
registry model always runs offline; the remaining entries load published
checkpoints and require the ``hub`` extra plus network access to the
weight hosts.
"""

from __future__ import annotations

from dataclasses import dataclass

POOLINGS = ("cls_token", "mean_patch", "pooled_head")


@dataclass(frozen=True)
class ModelEntry:
    model_id: str
    family: str
    dim: int
    input_size: int
    default_pooling: str
    poolings: tuple[str, ...]
    weights_ref: str
    description: str

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"{self.model_id}: dim must be positive")
        if self.input_size < 1:
            raise ValueError(f"{self.model_id}: input_size must be positive")
        if self.default_pooling not in self.poolings:
            raise ValueError(
                f"{self.model_id}: default pooling {self.default_pooling!r} "
                f"is not among supported poolings {self.poolings}"
            )
        for pooling in self.poolings:
            if pooling not in POOLINGS:
                raise ValueError(f"{self.model_id}: unknown pooling {pooling!r}")


REGISTRY: tuple[ModelEntry, ...] = (
    ModelEntry(
        model_id="clip-vit-base-patch32",
        family="clip",
        dim=768,
        input_size=224,
        default_pooling="cls_token",
        poolings=("cls_token", "mean_patch", "pooled_head"),
        weights_ref="openai/clip-vit-base-patch32",
        description="CLIP ViT-B/32 vision tower",
    ),
    ModelEntry(
        model_id="dinov2-small",
        family="dino",
        dim=384,
        input_size=518,
        default_pooling="cls_token",
        poolings=("cls_token", "mean_patch", "pooled_head"),
        weights_ref="facebook/dinov2-small",
        description="DINOv2 ViT-S/14 backbone",
    ),
    ModelEntry(
        model_id="resnet18-imagenet1k",
        family="baseline",
        dim=512,
        input_size=224,
        default_pooling="pooled_head",
        poolings=("pooled_head",),
        weights_ref="IMAGENET1K_V1",
        description="torchvision ResNet18 with ImageNet-1k weights",
    ),
    ModelEntry(
        model_id="sam-vit-base",
        family="sam",
        dim=256,
        input_size=1024,
        default_pooling="mean_patch",
        poolings=("mean_patch",),
        weights_ref="facebook/sam-vit-base",
        description="Segment Anything ViT-B image encoder",
    ),
    ModelEntry(
        model_id="tiny-patch4",
        family="baseline",
        dim=64,
        input_size=16,
        default_pooling="mean_patch",
        poolings=("mean_patch",),
        weights_ref="",
        description="Frozen random-projection 4x4-patch encoder, runs offline",
    ),
)

FAMILIES = tuple(sorted({entry.family for entry in REGISTRY}))


def list_models(family: str | None = None) -> tuple[ModelEntry, ...]:
    """Registry entries sorted by model id, optionally filtered by family.

    An unknown family is not an error; it simply matches nothing.
    """
    entries = sorted(REGISTRY, key=lambda entry: entry.model_id)
    if family is not None:
        entries = [entry for entry in entries if entry.family == family]
    return tuple(entries)


def get_model(model_id: str) -> ModelEntry:
    for entry in REGISTRY:
        if entry.model_id == model_id:
            return entry
    known = ", ".join(entry.model_id for entry in list_models())
    raise ValueError(f"unknown model id {model_id!r}; registry has: {known}")
