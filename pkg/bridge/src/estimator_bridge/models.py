"""Model adapters.

Every adapter exposes the same tiny surface: ``name`` and ``version``
strings for the handshake, and ``estimate(frames)`` returning a
``(rotation, translation)`` pair for the two anchor frames given the whole
frame list as context. Heavy dependencies import lazily inside the adapter
constructors so the bridge itself stays installable everywhere.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Optional, Sequence

from .relpose import relative_from_cam_to_world

_IDENTITY = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


class ModelUnavailable(Exception):
    """The requested model cannot be constructed in this environment."""


class EchoModel:
    """Answers every request with the identity pose.

    Useful for wiring tests and as a protocol reference: the transcript it
    produces is pinned byte-for-byte. Counts invocations so tests can assert
    one inference per request.
    """

    name = "echo"
    version = "1"

    def __init__(self):
        self.calls = 0

    def estimate(self, frames: Sequence[str]):
        self.calls += 1
        return _IDENTITY, (0.0, 0.0, 0.0)


def _checkpoint_tag(checkpoint: str) -> str:
    """Short stable identifier for a weights file (name + content digest)."""
    path = Path(checkpoint)
    digest = hashlib.sha256()
    digest.update(path.name.encode())
    if path.is_file():
        with open(path, "rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 20), b""):
                digest.update(chunk)
    return f"{path.stem}-{digest.hexdigest()[:12]}"


class Dust3rModel:
    """DUSt3R adapter: joint reconstruction of all frames, then the relative
    transform between the two anchors is read off the aligned camera poses."""

    name = "dust3r"

    def __init__(self, checkpoint: str, device: str = "cuda"):
        if not checkpoint:
            raise ModelUnavailable("dust3r needs --checkpoint pointing at a weights file")
        try:
            import torch  # noqa: F401
            from dust3r.cloud_opt import GlobalAlignerMode, global_aligner
            from dust3r.image_pairs import make_pairs
            from dust3r.inference import inference
            from dust3r.model import AsymmetricCroCo3DStereo
            from dust3r.utils.image import load_images
        except ImportError as exc:
            raise ModelUnavailable(
                "dust3r (and torch) must be installed to use --model dust3r"
            ) from exc

        self._torch = torch
        self._inference = inference
        self._make_pairs = make_pairs
        self._global_aligner = global_aligner
        self._aligner_mode = GlobalAlignerMode.PointCloudOptimizer
        self._load_images = load_images
        self._device = device
        self._model = AsymmetricCroCo3DStereo.from_pretrained(checkpoint).to(device)
        self.version = _checkpoint_tag(checkpoint)

    def estimate(self, frames: Sequence[str]):
        images = self._load_images(list(frames), size=512)
        pairs = self._make_pairs(images, scene_graph="complete", symmetrize=True)
        with self._torch.no_grad():
            output = self._inference(pairs, self._model, self._device, batch_size=1)
        scene = self._global_aligner(output, device=self._device, mode=self._aligner_mode)
        scene.compute_global_alignment(init="mst", niter=300, schedule="cosine", lr=0.01)
        cam_to_world = scene.get_im_poses().detach().cpu().numpy()
        return relative_from_cam_to_world(cam_to_world[0], cam_to_world[1])


class Mast3rModel:
    """MASt3R adapter; same contract as :class:`Dust3rModel`."""

    name = "mast3r"

    def __init__(self, checkpoint: str, device: str = "cuda"):
        if not checkpoint:
            raise ModelUnavailable("mast3r needs --checkpoint pointing at a weights file")
        try:
            import torch  # noqa: F401
            from dust3r.cloud_opt import GlobalAlignerMode, global_aligner
            from dust3r.image_pairs import make_pairs
            from dust3r.inference import inference
            from dust3r.utils.image import load_images
            from mast3r.model import AsymmetricMASt3R
        except ImportError as exc:
            raise ModelUnavailable(
                "mast3r (and torch, dust3r) must be installed to use --model mast3r"
            ) from exc

        self._torch = torch
        self._inference = inference
        self._make_pairs = make_pairs
        self._global_aligner = global_aligner
        self._aligner_mode = GlobalAlignerMode.PointCloudOptimizer
        self._load_images = load_images
        self._device = device
        self._model = AsymmetricMASt3R.from_pretrained(checkpoint).to(device)
        self.version = _checkpoint_tag(checkpoint)

    def estimate(self, frames: Sequence[str]):
        images = self._load_images(list(frames), size=512)
        pairs = self._make_pairs(images, scene_graph="complete", symmetrize=True)
        with self._torch.no_grad():
            output = self._inference(pairs, self._model, self._device, batch_size=1)
        scene = self._global_aligner(output, device=self._device, mode=self._aligner_mode)
        scene.compute_global_alignment(init="mst", niter=300, schedule="cosine", lr=0.01)
        cam_to_world = scene.get_im_poses().detach().cpu().numpy()
        return relative_from_cam_to_world(cam_to_world[0], cam_to_world[1])


_MODELS = {
    "echo": lambda checkpoint, device: EchoModel(),
    "dust3r": Dust3rModel,
    "mast3r": Mast3rModel,
}


def load_model(kind: str, checkpoint: Optional[str] = None, device: str = "cuda"):
    """Construct the adapter for ``kind``; exactly one heavy load per process."""
    try:
        factory = _MODELS[kind]
    except KeyError:
        raise ModelUnavailable(
            f"unknown model {kind!r}; expected one of {sorted(_MODELS)}"
        ) from None
    return factory(checkpoint, device)
