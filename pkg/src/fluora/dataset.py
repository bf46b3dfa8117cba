"""Labeled frame inventory: manifests, splits, crops, and video ingestion.

Manifests are immutable once built and can never contain a patient that
appears in both splits; the constructor enforces this so no leaking
manifest is ever serialized.
"""

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import cv2
import numpy as np

from .errors import (
    CropTooLarge,
    DecodeError,
    DuplicateFrameId,
    EmptyVideo,
    InvalidFraction,
    InvalidParams,
    SplitLeakage,
    UnlabeledFrame,
)

LABEL_FLUORESCENT = "fluorescent"
LABEL_NOT_FLUORESCENT = "not_fluorescent"
LABELS = (LABEL_FLUORESCENT, LABEL_NOT_FLUORESCENT)

SPLIT_TRAIN = "train"
SPLIT_HOLDOUT = "holdout"
SPLITS = (SPLIT_TRAIN, SPLIT_HOLDOUT)

CAMERA_PINPOINT = "pinpoint"
CAMERA_STRYKER1688 = "stryker1688"
CAMERA_ARTHREX = "arthrex"
CAMERA_SYNTHETIC = "synthetic"
CAMERA_OTHER = "other"
CAMERAS = (CAMERA_PINPOINT, CAMERA_STRYKER1688, CAMERA_ARTHREX,
           CAMERA_SYNTHETIC, CAMERA_OTHER)

# Direction of increasing distance from the blood supply along the axis.
DISTAL_INCREASING = "increasing_x"
DISTAL_DECREASING = "decreasing_x"
DISTAL_DIRECTIONS = (DISTAL_INCREASING, DISTAL_DECREASING)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    patient_id: str
    camera_id: str
    path: str
    label: str | None              # must be set before manifest inclusion
    split: str = SPLIT_TRAIN
    width: int = 0
    height: int = 0
    truth_boundary_x: int | None = None  # synthetic frames only

    def __post_init__(self):
        if self.camera_id not in CAMERAS:
            raise InvalidParams(f"unknown camera {self.camera_id!r}")
        if self.split not in SPLITS:
            raise InvalidParams(f"unknown split {self.split!r}")
        if self.label is not None and self.label not in LABELS:
            raise InvalidParams(f"unknown label {self.label!r}")

    def to_json(self):
        return {
            "frame_id": self.frame_id,
            "patient_id": self.patient_id,
            "camera_id": self.camera_id,
            "path": self.path,
            "label": self.label,
            "split": self.split,
            "width": self.width,
            "height": self.height,
            "truth_boundary_x": self.truth_boundary_x,
        }

    @staticmethod
    def from_json(obj):
        return FrameRecord(
            frame_id=obj["frame_id"],
            patient_id=obj["patient_id"],
            camera_id=obj["camera_id"],
            path=obj["path"],
            label=obj.get("label"),
            split=obj.get("split", SPLIT_TRAIN),
            width=int(obj.get("width", 0)),
            height=int(obj.get("height", 0)),
            truth_boundary_x=obj.get("truth_boundary_x"),
        )


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        patient_splits = {}
        for rec in self.records:
            if rec.label is None:
                raise UnlabeledFrame(f"frame {rec.frame_id} has no label")
            if rec.frame_id in seen:
                raise DuplicateFrameId(f"duplicate frame id {rec.frame_id}")
            seen.add(rec.frame_id)
            prev = patient_splits.setdefault(rec.patient_id, rec.split)
            if prev != rec.split:
                raise SplitLeakage(
                    f"patient {rec.patient_id} appears in both splits")

    def split_records(self, split):
        return [r for r in self.records if r.split == split]

    def summary(self):
        """Patients / frames / positive fraction per split, Table-1 style."""
        out = {}
        for split in SPLITS:
            recs = self.split_records(split)
            n = len(recs)
            pos = sum(1 for r in recs if r.label == LABEL_FLUORESCENT)
            out[split] = {
                "patients": len({r.patient_id for r in recs}),
                "frames": n,
                "positive_fraction": (pos / n) if n else 0.0,
            }
        return out


def build_manifest(records):
    """Validate records into a manifest (SplitLeakage / UnlabeledFrame /
    DuplicateFrameId on violation)."""
    return DatasetManifest(records=tuple(records))


def save_manifest(manifest, path):
    """JSON Lines: a schema_version header line, then one record per line.

    Frame paths are stored relative to the manifest location when possible.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema_version": manifest.schema_version}) + "\n")
        for rec in manifest.records:
            obj = rec.to_json()
            p = Path(obj["path"])
            if p.is_absolute():
                try:
                    obj["path"] = str(p.resolve().relative_to(base))
                except ValueError:
                    pass  # outside the manifest tree; keep absolute
            fh.write(json.dumps(obj) + "\n")
    return path


def load_manifest(path):
    """Read a JSONL manifest; relative frame paths resolve against it."""
    path = Path(path)
    base = path.parent.resolve()
    records = []
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        version = int(header.get("schema_version", 0))
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = FrameRecord.from_json(json.loads(line))
            p = Path(rec.path)
            if not p.is_absolute():
                rec = replace(rec, path=str(base / p))
            records.append(rec)
    return DatasetManifest(records=tuple(records), schema_version=version)


def internal_split(manifest, fraction, seed):
    """Frame-level random partition of the train split, reproducible by seed.

    Returns (train_part, val_part); the validation part holds
    round(fraction * N) records. Frame-level on purpose: the holdout split
    is patient-level but the internal one is not.
    """
    if not (0.0 < fraction < 1.0):
        raise InvalidFraction("fraction must be in (0, 1)")
    records = manifest.split_records(SPLIT_TRAIN)
    n = len(records)
    n_val = int(fraction * n + 0.5)
    rng = np.random.default_rng(seed % 2**64)
    perm = rng.permutation(n)
    val_idx = set(perm[:n_val].tolist())
    train_part = [records[i] for i in range(n) if i not in val_idx]
    val_part = [records[i] for i in range(n) if i in val_idx]
    return train_part, val_part


@dataclass(frozen=True)
class CropSpec:
    crop_size: int = 224
    seed: int = 0


def random_crop(image, spec, draw_index, frame_id=""):
    """Deterministic random square crop.

    Offsets are derived from (spec.seed, frame_id, draw_index) so a given
    draw is reproducible regardless of call order.
    """
    h, w = image.shape[:2]
    cs = spec.crop_size
    if cs > min(h, w):
        raise CropTooLarge(f"crop {cs} exceeds frame {w}x{h}")
    digest = hashlib.blake2b(
        f"{spec.seed}|{frame_id}|{draw_index}".encode(), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    y0 = int(rng.integers(0, h - cs + 1))
    x0 = int(rng.integers(0, w - cs + 1))
    return np.ascontiguousarray(image[y0:y0 + cs, x0:x0 + cs])


def ingest_video(video, patient_id, camera_id, sample_stride, out_dir):
    """Extract every sample_stride-th frame of a video as PNG.

    Returned records carry provenance but no label; labels must be assigned
    before the records can enter a manifest.
    """
    if sample_stride < 1:
        raise InvalidParams("sample_stride must be >= 1")
    if camera_id not in CAMERAS:
        raise InvalidParams(f"unknown camera {camera_id!r}")
    video = Path(video)
    if not video.exists():
        raise DecodeError(f"no such video: {video}")
    cap = cv2.VideoCapture(str(video))
    try:
        if not cap.isOpened():
            raise DecodeError(f"cannot decode video: {video}")
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        records = []
        index = 0
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            if index % sample_stride == 0:
                frame_id = f"{patient_id}_{camera_id}_{index:06d}"
                path = out_dir / f"{frame_id}.png"
                cv2.imwrite(str(path), frame)  # BGR in, BGR out
                h, w = frame.shape[:2]
                records.append(FrameRecord(
                    frame_id=frame_id, patient_id=patient_id,
                    camera_id=camera_id, path=str(path), label=None,
                    split=SPLIT_TRAIN, width=w, height=h,
                ))
            index += 1
        if index == 0:
            raise EmptyVideo(f"video has no frames: {video}")
        return records
    finally:
        cap.release()
