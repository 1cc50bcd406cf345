"""Encoder construction for every registry entry.

An encoder is a callable mapping a list of PIL images to a float32
array of shape (batch, dim). Checkpoint-backed encoders import their
runtime lazily and convert any load failure into ModelUnavailable so
callers see one error type whether the problem is a missing package or
an unreachable weight host.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ModelUnavailable
from .registry import ModelEntry

TINY_PATCH = 4
_TINY_PROJECTION_SEED = 815769023


def _tiny_projection(dim: int) -> np.ndarray:
    rng = np.random.default_rng(_TINY_PROJECTION_SEED)
    flat = TINY_PATCH * TINY_PATCH
    return (rng.standard_normal((flat, dim)) / np.sqrt(flat)).astype(np.float32)


class TinyPatchEncoder:
    """Frozen random-projection encoder over non-overlapping 4x4 patches.

    Grayscale pixels are scaled to [-1, 1], each patch is projected
    through a fixed Gaussian matrix and squashed with tanh, and patch
    tokens are mean-pooled. Pure numpy, so it runs without any deep
    learning runtime and is bit-deterministic for fixed inputs.
    """

    def __init__(self, entry: ModelEntry, input_size: int):
        if input_size % TINY_PATCH != 0:
            raise ValueError(
                f"{entry.model_id}: input_size must be a multiple of "
                f"{TINY_PATCH}, got {input_size}"
            )
        self.input_size = input_size
        self.weights = _tiny_projection(entry.dim)

    def __call__(self, images: list[Image.Image]) -> np.ndarray:
        side = self.input_size
        grid = side // TINY_PATCH
        rows = []
        for image in images:
            gray = image.convert("L").resize((side, side), Image.BILINEAR)
            pixels = np.asarray(gray, dtype=np.float32) / 255.0
            pixels = (pixels - 0.5) / 0.5
            patches = (
                pixels.reshape(grid, TINY_PATCH, grid, TINY_PATCH)
                .transpose(0, 2, 1, 3)
                .reshape(grid * grid, TINY_PATCH * TINY_PATCH)
            )
            tokens = np.tanh(patches @ self.weights)
            rows.append(tokens.mean(axis=0))
        return np.stack(rows).astype(np.float32)


def _require(entry: ModelEntry, module: str):
    import importlib

    try:
        return importlib.import_module(module)
    except ImportError as exc:
        raise ModelUnavailable(
            f"{entry.model_id}: {module} is not installed; "
            f"install the 'hub' extra"
        ) from exc


def _build_resnet18(entry: ModelEntry, input_size: int, pooling: str, device: str):
    torch = _require(entry, "torch")
    tv_models = _require(entry, "torchvision.models")
    try:
        weights = tv_models.ResNet18_Weights[entry.weights_ref]
        net = tv_models.resnet18(weights=weights)
    except Exception as exc:
        raise ModelUnavailable(
            f"{entry.model_id}: weights could not be loaded: {exc}"
        ) from exc
    net.fc = torch.nn.Identity()
    net.eval().to(device)
    preprocess = weights.transforms()

    def encode(images: list[Image.Image]) -> np.ndarray:
        with torch.inference_mode():
            batch = torch.stack(
                [preprocess(image.convert("RGB")) for image in images]
            ).to(device)
            return net(batch).cpu().numpy().astype(np.float32)

    return encode


def _pool_hidden(hidden, pooler, pooling: str) -> np.ndarray:
    if pooling == "cls_token":
        pooled = hidden[:, 0]
    elif pooling == "mean_patch":
        pooled = hidden[:, 1:].mean(dim=1)
    else:
        pooled = pooler
    return pooled.cpu().numpy().astype(np.float32)


def _build_vit_backbone(entry: ModelEntry, input_size: int, pooling: str, device: str):
    torch = _require(entry, "torch")
    transformers = _require(entry, "transformers")
    try:
        processor = transformers.AutoImageProcessor.from_pretrained(entry.weights_ref)
        if entry.family == "clip":
            model = transformers.CLIPVisionModel.from_pretrained(entry.weights_ref)
        else:
            model = transformers.AutoModel.from_pretrained(entry.weights_ref)
    except Exception as exc:
        raise ModelUnavailable(
            f"{entry.model_id}: weights could not be loaded: {exc}"
        ) from exc
    model.eval().to(device)

    def encode(images: list[Image.Image]) -> np.ndarray:
        inputs = processor(
            images=[image.convert("RGB") for image in images], return_tensors="pt"
        ).to(device)
        with torch.inference_mode():
            outputs = model(**inputs)
        return _pool_hidden(
            outputs.last_hidden_state, getattr(outputs, "pooler_output", None), pooling
        )

    return encode


def _build_sam_encoder(entry: ModelEntry, input_size: int, pooling: str, device: str):
    torch = _require(entry, "torch")
    transformers = _require(entry, "transformers")
    try:
        processor = transformers.AutoProcessor.from_pretrained(entry.weights_ref)
        model = transformers.SamModel.from_pretrained(entry.weights_ref)
    except Exception as exc:
        raise ModelUnavailable(
            f"{entry.model_id}: weights could not be loaded: {exc}"
        ) from exc
    encoder = model.vision_encoder
    encoder.eval().to(device)

    def encode(images: list[Image.Image]) -> np.ndarray:
        inputs = processor(
            images=[image.convert("RGB") for image in images], return_tensors="pt"
        ).to(device)
        with torch.inference_mode():
            # (batch, channels, h, w) spatial embedding map
            embeddings = encoder(inputs["pixel_values"]).last_hidden_state
        pooled = embeddings.mean(dim=(2, 3))
        return pooled.cpu().numpy().astype(np.float32)

    return encode


def build_encoder(entry: ModelEntry, input_size: int, pooling: str, device: str):
    if entry.model_id == "tiny-patch4":
        return TinyPatchEncoder(entry, input_size)
    if entry.family == "baseline":
        return _build_resnet18(entry, input_size, pooling, device)
    if entry.family == "sam":
        return _build_sam_encoder(entry, input_size, pooling, device)
    return _build_vit_backbone(entry, input_size, pooling, device)
