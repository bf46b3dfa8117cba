"""Binary fluorescence classifier.

A 34-layer residual network with a fresh two-class head is fine-tuned on
random crops of the training frames. Inference is deterministic: resize the
shortest side to the model input size, centre-crop, normalize, softmax; the
fluorescent-class probability is thresholded with a strict "above"
comparison (0.8 by default).
"""

import hashlib
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torchvision
from PIL import Image

from .dataset import (
    LABEL_FLUORESCENT,
    LABEL_NOT_FLUORESCENT,
    SPLIT_TRAIN,
    CropSpec,
    internal_split,
    random_crop,
)
from .errors import ArtifactCorrupt, DecodeError, InvalidConfig, SingleClassDataset
from .imgio import load_image

ARCHITECTURE_ID = "residual-34"
DEFAULT_THRESHOLD = 0.8
CLASSES = (LABEL_NOT_FLUORESCENT, LABEL_FLUORESCENT)  # head index 1 = positive

POLICY_SHORTEST_SIDE = "shortest_side_center_crop"
POLICY_SQUASH = "squash"

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

DESCRIPTOR_FILE = "descriptor.json"
WEIGHTS_FILE = "weights.pt"


@dataclass(frozen=True)
class Preprocessing:
    input_size: int = 224
    mean: tuple = IMAGENET_MEAN
    std: tuple = IMAGENET_STD
    resize_policy: str = POLICY_SHORTEST_SIDE

    def to_json(self):
        return {"input_size": self.input_size, "mean": list(self.mean),
                "std": list(self.std), "resize_policy": self.resize_policy}

    @staticmethod
    def from_json(obj):
        return Preprocessing(input_size=int(obj["input_size"]),
                             mean=tuple(obj["mean"]), std=tuple(obj["std"]),
                             resize_policy=obj["resize_policy"])


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 4
    internal_val_fraction: float = 0.2
    crop: CropSpec = field(default_factory=CropSpec)
    batch_size: int = 8
    learning_rate: float = 1e-3
    seed: int = 0
    class_weighting: bool = True  # inverse-frequency loss weights

    def validate(self):
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if not (0.0 < self.internal_val_fraction < 1.0):
            raise InvalidConfig("internal_val_fraction must be in (0, 1)")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")

    def to_json(self):
        return {"epochs": self.epochs,
                "internal_val_fraction": self.internal_val_fraction,
                "crop_size": self.crop.crop_size, "crop_seed": self.crop.seed,
                "batch_size": self.batch_size,
                "learning_rate": self.learning_rate, "seed": self.seed,
                "class_weighting": self.class_weighting}


@dataclass(frozen=True)
class ClassificationResult:
    probability: float   # fluorescent-class probability
    label: str
    threshold: float
    model_version: str

    def to_json(self):
        return {"probability": round(self.probability, 6), "label": self.label,
                "threshold": self.threshold, "model_version": self.model_version}


@dataclass
class ModelArtifact:
    architecture_id: str
    input_size: int
    preprocessing: Preprocessing
    threshold: float
    training_config: dict
    version: str
    model: torch.nn.Module

    def descriptor(self):
        return {"architecture_id": self.architecture_id,
                "input_size": self.input_size,
                "preprocessing": self.preprocessing.to_json(),
                "threshold": self.threshold,
                "training_config": self.training_config,
                "version": self.version,
                "classes": list(CLASSES),
                "weights_file": WEIGHTS_FILE}


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float | None
    val_accuracy: float | None
    seconds: float


@dataclass
class TrainingReport:
    epochs: list
    total_seconds: float
    n_train: int
    n_val: int
    base_weights: str
    class_weights: tuple | None

    def to_json(self):
        return {"epochs": [vars(e) for e in self.epochs],
                "total_seconds": self.total_seconds,
                "n_train": self.n_train, "n_val": self.n_val,
                "base_weights": self.base_weights,
                "class_weights": list(self.class_weights) if self.class_weights else None}


def apply_threshold(probability, threshold):
    """Fluorescent iff probability is strictly above the threshold."""
    if not (0.0 <= probability <= 1.0) or not (0.0 <= threshold <= 1.0):
        raise ValueError("probability and threshold must be in [0, 1]")
    return LABEL_FLUORESCENT if probability > threshold else LABEL_NOT_FLUORESCENT


def resize_geometry(height, width, prep):
    """Resize/crop plan for the deterministic inference path.

    Returns (new_w, new_h, left, top): the resized frame dimensions and the
    top-left corner of the input_size crop within it.
    """
    s = prep.input_size
    if prep.resize_policy == POLICY_SQUASH:
        return s, s, 0, 0
    if height <= width:
        new_h = s
        new_w = max(s, int(round(width * s / height)))
    else:
        new_w = s
        new_h = max(s, int(round(height * s / width)))
    return new_w, new_h, (new_w - s) // 2, (new_h - s) // 2


def preprocess_image(image, prep):
    """RGB uint8 array -> normalized float32 tensor (3, S, S)."""
    h, w = image.shape[:2]
    s = prep.input_size
    new_w, new_h, left, top = resize_geometry(h, w, prep)
    pil = Image.fromarray(image, mode="RGB")
    if (new_w, new_h) != (w, h):
        pil = pil.resize((new_w, new_h), Image.BILINEAR)
    arr = np.asarray(pil, dtype=np.float32)[top:top + s, left:left + s] / 255.0
    arr = (arr - np.asarray(prep.mean, dtype=np.float32)) / np.asarray(prep.std, dtype=np.float32)
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))


def build_network(base_weights="auto"):
    """ResNet34 backbone with a fresh 2-class head.

    base_weights: "auto" tries the torchvision ImageNet checkpoint and falls
    back to random init when unavailable (offline); "random" skips the
    attempt; a path loads a saved state dict. Returns (model, description).
    """
    model = torchvision.models.resnet34(weights=None)
    used = "random-init"
    if base_weights in ("auto", "imagenet"):
        try:
            weights = torchvision.models.ResNet34_Weights.IMAGENET1K_V1
            model = torchvision.models.resnet34(weights=weights)
            used = "imagenet-pretrained"
        except Exception as exc:
            if base_weights == "imagenet":
                raise ArtifactCorrupt(f"pretrained weights unavailable: {exc}") from exc
            warnings.warn(f"pretrained weights unavailable ({exc}); using random init")
    elif base_weights not in (None, "random"):
        state = torch.load(str(base_weights), map_location="cpu")
        model.load_state_dict(state)
        used = f"file:{base_weights}"
    model.fc = torch.nn.Linear(model.fc.in_features, len(CLASSES))
    return model, used


def _label_index(label):
    return CLASSES.index(label)


def _load_training_crop(record, crop_spec, draw_index, input_size):
    image = load_image(record.path)
    crop = random_crop(image, crop_spec, draw_index, frame_id=record.frame_id)
    if crop.shape[0] != input_size:
        crop = np.asarray(
            Image.fromarray(crop, mode="RGB").resize((input_size, input_size),
                                                     Image.BILINEAR),
            dtype=np.uint8)
    return crop


def _normalize_batch(crops, prep):
    arr = np.stack(crops).astype(np.float32) / 255.0
    arr = (arr - np.asarray(prep.mean, dtype=np.float32)) / np.asarray(prep.std, dtype=np.float32)
    return torch.from_numpy(arr.transpose(0, 3, 1, 2).copy())


def train_step(model, loss_fn, optimizer, xb, yb, scheduler=None):
    """One optimizer step; returns the batch loss before the step."""
    model.train()
    optimizer.zero_grad(set_to_none=True)
    loss = loss_fn(model(xb), yb)
    loss.backward()
    optimizer.step()
    if scheduler is not None:
        scheduler.step()
    return float(loss.detach())


def _evaluate(model, records, prep, loss_fn, threshold):
    """Deterministic full-frame pass; returns (mean loss, accuracy) or Nones."""
    if not records:
        return None, None
    model.eval()
    losses = []
    correct = 0
    with torch.no_grad():
        for rec in records:
            x = preprocess_image(load_image(rec.path), prep)[None]
            logits = model(x)
            y = torch.tensor([_label_index(rec.label)])
            losses.append(float(loss_fn(logits, y)))
            prob = float(torch.softmax(logits, dim=1)[0, 1])
            if apply_threshold(prob, threshold) == rec.label:
                correct += 1
    return float(np.mean(losses)), correct / len(records)


def train(manifest, config, base_weights="auto", out_dir=None, progress=None):
    """Fine-tune the classifier on the manifest's train split.

    Returns (ModelArtifact, TrainingReport). Internal validation uses a
    random frame-level fraction of the train split; per-epoch stats go into
    the report. NonConvergence is never an error: the report simply records
    what happened.
    """
    config.validate()
    labels = {r.label for r in manifest.split_records(SPLIT_TRAIN)}
    if len(labels) < 2:
        raise SingleClassDataset("train split must contain both classes")

    train_recs, val_recs = internal_split(manifest, config.internal_val_fraction,
                                          config.seed)
    if not {r.label for r in train_recs} == set(CLASSES):
        raise SingleClassDataset("internal split left a single-class train part; "
                                 "use more frames or another seed")

    torch.manual_seed(config.seed % 2**63)
    model, weights_used = build_network(base_weights)

    prep = Preprocessing(input_size=config.crop.crop_size)
    class_weights = None
    if config.class_weighting:
        counts = np.array([sum(1 for r in train_recs if r.label == c)
                           for c in CLASSES], dtype=np.float64)
        inv = counts.sum() / (len(CLASSES) * counts)
        class_weights = tuple(float(v) for v in inv)
        loss_fn = torch.nn.CrossEntropyLoss(weight=torch.tensor(inv, dtype=torch.float32))
    else:
        loss_fn = torch.nn.CrossEntropyLoss()

    n = len(train_recs)
    steps_per_epoch = math.ceil(n / config.batch_size)
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    scheduler = torch.optim.lr_scheduler.OneCycleLR(
        optimizer, max_lr=config.learning_rate,
        total_steps=config.epochs * steps_per_epoch)

    epochs = []
    t_start = time.perf_counter()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng((config.seed + epoch) % 2**64).permutation(n)
        batch_losses = []
        for b in range(steps_per_epoch):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            crops = [_load_training_crop(train_recs[i], config.crop, epoch,
                                         prep.input_size) for i in idx]
            xb = _normalize_batch(crops, prep)
            yb = torch.tensor([_label_index(train_recs[i].label) for i in idx])
            batch_losses.append(train_step(model, loss_fn, optimizer, xb, yb,
                                           scheduler))
        val_loss, val_acc = _evaluate(model, val_recs, prep, loss_fn,
                                      DEFAULT_THRESHOLD)
        stats = EpochStats(epoch=epoch, train_loss=float(np.mean(batch_losses)),
                           val_loss=val_loss, val_accuracy=val_acc,
                           seconds=time.perf_counter() - t0)
        epochs.append(stats)
        if progress is not None:
            progress(stats)

    report = TrainingReport(
        epochs=epochs, total_seconds=time.perf_counter() - t_start,
        n_train=n, n_val=len(val_recs), base_weights=weights_used,
        class_weights=class_weights)

    artifact = ModelArtifact(
        architecture_id=ARCHITECTURE_ID, input_size=prep.input_size,
        preprocessing=prep, threshold=DEFAULT_THRESHOLD,
        training_config=config.to_json(), version=_version_for(model),
        model=model)
    model.eval()
    if out_dir is not None:
        save_artifact(artifact, out_dir)
    return artifact, report


def _state_digest(model):
    h = hashlib.sha256()
    for key, tensor in sorted(model.state_dict().items()):
        h.update(key.encode())
        h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def _version_for(model):
    return f"{ARCHITECTURE_ID}-{_state_digest(model)[:12]}"


def save_artifact(artifact, out_dir):
    """Write descriptor.json + weights blob; returns the directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(artifact.model.state_dict(), out_dir / WEIGHTS_FILE)
    desc = artifact.descriptor()
    desc["weights_sha256"] = _state_digest(artifact.model)
    with open(out_dir / DESCRIPTOR_FILE, "w", encoding="utf-8") as fh:
        json.dump(desc, fh, indent=2)
    return out_dir


def load_artifact(model_dir):
    """Load an artifact directory; raises ArtifactCorrupt on any defect."""
    model_dir = Path(model_dir)
    desc_path = model_dir / DESCRIPTOR_FILE
    if not desc_path.exists():
        raise ArtifactCorrupt(f"missing {DESCRIPTOR_FILE} in {model_dir}")
    try:
        with open(desc_path, encoding="utf-8") as fh:
            desc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactCorrupt(f"unreadable descriptor: {exc}") from exc
    try:
        weights_path = model_dir / desc.get("weights_file", WEIGHTS_FILE)
        model = torchvision.models.resnet34(weights=None)
        model.fc = torch.nn.Linear(model.fc.in_features, len(CLASSES))
        state = torch.load(weights_path, map_location="cpu")
        model.load_state_dict(state)
        model.eval()
        artifact = ModelArtifact(
            architecture_id=desc["architecture_id"],
            input_size=int(desc["input_size"]),
            preprocessing=Preprocessing.from_json(desc["preprocessing"]),
            threshold=float(desc["threshold"]),
            training_config=desc.get("training_config", {}),
            version=desc["version"],
            model=model)
    except ArtifactCorrupt:
        raise
    except Exception as exc:
        raise ArtifactCorrupt(f"cannot load model artifact: {exc}") from exc
    recorded = desc.get("weights_sha256")
    if recorded and recorded != _state_digest(model):
        raise ArtifactCorrupt("weights checksum mismatch")
    return artifact


def predict(artifact, image):
    """Classify one image (array, path, or bytes); deterministic."""
    if not isinstance(image, np.ndarray):
        image = load_image(image)
    x = preprocess_image(image, artifact.preprocessing)[None]
    artifact.model.eval()
    with torch.no_grad():
        probs = torch.softmax(artifact.model(x), dim=1)
    p = float(probs[0, 1])
    return ClassificationResult(
        probability=p, label=apply_threshold(p, artifact.threshold),
        threshold=artifact.threshold, model_version=artifact.version)


def predict_batch(artifact, images):
    """Elementwise predict; per-item DecodeErrors are collected in place."""
    out = []
    for image in images:
        try:
            out.append(predict(artifact, image))
        except DecodeError as exc:
            out.append(exc)
    return out
