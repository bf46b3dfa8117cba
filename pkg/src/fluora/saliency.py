"""Saliency maps and red-shaded overlays.

The map is a gradient-weighted class-activation map taken on the final
convolutional block, upsampled to the analysed image and min-max
normalized. Overlays suppress green/blue and push red so that higher
saliency reads as a darker, denser red.
"""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .classifier import preprocess_image, resize_geometry
from .errors import DimensionMismatch
from .imgio import load_image

METHOD_GRADCAM = "gradcam-layer4"

# how strongly the red channel is pushed toward saturation at full saliency
RED_BOOST = 0.25


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray          # H x W float32 in [0, 1]
    frame_id: str | None
    model_version: str
    method_id: str


def compute_saliency(artifact, image, frame_id=None):
    """Class-discriminative activation map for the predicted class.

    Deterministic for a fixed artifact and image. The map lives in the
    original image geometry; regions the centre crop never showed the model
    carry zero saliency.
    """
    if not isinstance(image, np.ndarray):
        image = load_image(image)
    h, w = image.shape[:2]
    prep = artifact.preprocessing
    model = artifact.model
    model.eval()

    activations = {}
    gradients = {}

    def fwd_hook(_module, _inp, out):
        activations["a"] = out

    def bwd_hook(_module, _grad_in, grad_out):
        gradients["g"] = grad_out[0]

    h1 = model.layer4.register_forward_hook(fwd_hook)
    h2 = model.layer4.register_full_backward_hook(bwd_hook)
    try:
        x = preprocess_image(image, prep)[None]
        model.zero_grad(set_to_none=True)
        logits = model(x)
        prob = float(torch.softmax(logits, dim=1)[0, 1])
        cls = 1 if prob > artifact.threshold else 0
        logits[0, cls].backward()
    finally:
        h1.remove()
        h2.remove()
        model.zero_grad(set_to_none=True)

    weights = gradients["g"].mean(dim=(2, 3), keepdim=True)
    cam = F.relu((weights * activations["a"]).sum(dim=1, keepdim=True))
    s = prep.input_size
    cam = F.interpolate(cam, size=(s, s), mode="bilinear", align_corners=False)

    # place the crop's map back into the full resized frame, then into the
    # original geometry; cropped-away margins stay at zero
    new_w, new_h, left, top = resize_geometry(h, w, prep)
    full = torch.zeros((1, 1, new_h, new_w))
    full[0, 0, top:top + s, left:left + s] = cam[0, 0]
    full = F.interpolate(full, size=(h, w), mode="bilinear", align_corners=False)
    values = full[0, 0].detach().numpy().astype(np.float32)

    vmin = float(values.min())
    vmax = float(values.max())
    if vmax > vmin:
        values = (values - vmin) / (vmax - vmin)
    elif vmax > 0.0:
        values = np.ones_like(values)
    return SaliencyMap(values=values, frame_id=frame_id,
                       model_version=artifact.version, method_id=METHOD_GRADCAM)


def render_overlay(image, smap, opacity):
    """Blend a red heat ramp over the image; opacity 0 is a bit-exact no-op.

    For any fixed pixel the red-channel dominance is non-decreasing in the
    saliency value: red is only ever pushed up, green/blue only down.
    """
    if not (0.0 <= opacity <= 1.0):
        raise ValueError("opacity must be in [0, 1]")
    values = smap.values if isinstance(smap, SaliencyMap) else np.asarray(smap)
    if values.shape != image.shape[:2]:
        raise DimensionMismatch(
            f"map {values.shape} does not match image {image.shape[:2]}")
    if opacity == 0.0:
        return image.copy()
    alpha = opacity * values.astype(np.float64)
    out = image.astype(np.float64).copy()
    out[:, :, 0] += (255.0 - out[:, :, 0]) * alpha * RED_BOOST
    out[:, :, 1] *= 1.0 - alpha
    out[:, :, 2] *= 1.0 - alpha
    return np.clip(np.rint(out), 0.0, 255.0).astype(np.uint8)
