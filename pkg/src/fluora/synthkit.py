"""Synthetic fluorescence-angiography frame generator.

Frames show a horizontal band of pinkish colonic tissue on a bright swab
background. Perfused tissue emits in the green channel; the perfusion front
is a sigmoid along the longitudinal (x) axis so boundary estimation stays
nontrivial. Every frame carries its ground-truth label and boundary, which
the rest of the test suite uses as its oracle.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imgio, kernels
from .dataset import (
    CAMERA_SYNTHETIC,
    DISTAL_DECREASING,
    DISTAL_INCREASING,
    LABEL_FLUORESCENT,
    LABEL_NOT_FLUORESCENT,
    SPLIT_HOLDOUT,
    SPLIT_TRAIN,
    DatasetManifest,
    FrameRecord,
    save_manifest,
)
from .errors import InvalidParams

# Green-channel emission amplitude at gain 1.0, in 8-bit intensity units.
EMISSION_AMP = 235.0
# A strip whose mean emission exceeds this floor counts as fluorescent.
EMISSION_FLOOR = 12.0
# Strip width used by the ground-truth rule; matches the boundary module default.
TRUTH_STRIP_WIDTH = 100


@dataclass(frozen=True)
class SynthParams:
    """Generator parameters; identical params (incl. seed) give identical bytes."""

    width: int = 1440
    height: int = 1080
    colon_band: tuple = (430, 650)  # rows [top, bot) occupied by tissue
    boundary_x: int | None = None   # true perfusion front; None = uniform
    falloff_width: int = 40         # px over which emission decays across the front
    fluorescence_gain: float = 1.0  # 0..1 emission scale
    noise_sigma: float = 6.0        # additive gaussian noise, 8-bit units
    background_brightness: int = 242
    distal_direction: str = DISTAL_INCREASING
    seed: int = 0
    tissue_color: tuple = (196.0, 118.0, 132.0)

    def validate(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidParams("width and height must be positive")
        if not (0 < self.falloff_width < self.width):
            raise InvalidParams("falloff_width must be in (0, width)")
        if self.boundary_x is not None and not (0 <= self.boundary_x < self.width):
            raise InvalidParams("boundary_x must be in [0, width)")
        top, bot = self.colon_band
        if not (0 <= top < bot <= self.height):
            raise InvalidParams("colon_band must be an ordered interval inside the frame")
        if top == 0 and bot == self.height:
            raise InvalidParams("colon_band must be strictly inside the frame")
        if not (0.0 <= self.fluorescence_gain <= 1.0):
            raise InvalidParams("fluorescence_gain must be in [0, 1]")
        if self.noise_sigma < 0:
            raise InvalidParams("noise_sigma must be non-negative")
        if not (0 <= self.background_brightness <= 255):
            raise InvalidParams("background_brightness must be an 8-bit level")
        if self.distal_direction not in (DISTAL_INCREASING, DISTAL_DECREASING):
            raise InvalidParams(f"unknown distal_direction {self.distal_direction!r}")


@dataclass(frozen=True)
class SynthFrame:
    image: np.ndarray                     # H x W x 3 uint8
    truth_label: str                      # fluorescent / not_fluorescent
    truth_boundary_x: int | None
    params: SynthParams

    def fluorescence_mask(self):
        """Boolean H x W mask of pixels whose emission exceeds the floor."""
        p = self.params
        emission = emission_profile(p)
        mask = np.zeros((p.height, p.width), dtype=bool)
        top, bot = p.colon_band
        mask[top:bot, :] = emission[np.newaxis, :] >= EMISSION_FLOOR
        return mask


def emission_profile(params):
    """Per-column emission in 8-bit units (gain and amplitude applied).

    With a boundary the profile is a logistic front centred at boundary_x:
    saturated on the proximal side, near zero past boundary_x + falloff_width.
    """
    amp = params.fluorescence_gain * EMISSION_AMP
    x = np.arange(params.width, dtype=np.float64)
    if params.boundary_x is None:
        return np.full(params.width, amp, dtype=np.float64)
    # tau such that the high->low transition spans about falloff_width px
    tau = params.falloff_width / 8.0
    if params.distal_direction == DISTAL_INCREASING:
        arg = (x - params.boundary_x) / tau
    else:
        arg = (params.boundary_x - x) / tau
    return amp / (1.0 + np.exp(np.clip(arg, -60.0, 60.0)))


def _strip_intervals(extent, strip_width):
    """[x0, x1) tiles covering [0, extent); final remainder tile kept."""
    edges = list(range(0, extent, strip_width)) + [extent]
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


def truth_label_for(params):
    """Fluorescent iff some truth-strip tile has mean emission above the floor."""
    emission = emission_profile(params)
    for x0, x1 in _strip_intervals(params.width, TRUTH_STRIP_WIDTH):
        if emission[x0:x1].mean() >= EMISSION_FLOOR:
            return LABEL_FLUORESCENT
    return LABEL_NOT_FLUORESCENT


def generate_frame(params):
    """Render one frame; deterministic in params (including seed)."""
    params.validate()
    top, bot = params.colon_band
    b = float(params.background_brightness)
    field = kernels.compose_frame(
        params.height, params.width, top, bot,
        np.array([b, b, b]), np.asarray(params.tissue_color, dtype=np.float64),
        emission_profile(params),
    )
    rng = np.random.default_rng(params.seed % 2**64)
    if params.noise_sigma > 0:
        field = field + rng.standard_normal(field.shape) * params.noise_sigma
    image = np.clip(np.rint(field), 0.0, 255.0).astype(np.uint8)
    return SynthFrame(
        image=image,
        truth_label=truth_label_for(params),
        truth_boundary_x=params.boundary_x,
        params=params,
    )


@dataclass(frozen=True)
class _PatientProfile:
    """Per-patient appearance draw so patients are distinguishable."""

    band: tuple
    tissue: tuple
    background: int
    noise_sigma: float
    gain: float
    falloff: int

    @staticmethod
    def draw(rng, width, height):
        center = rng.uniform(0.45, 0.55) * height
        half = rng.uniform(0.09, 0.15) * height
        top = int(max(1, center - half))
        bot = int(min(height - 1, center + half))
        tissue = tuple(float(np.clip(c + rng.uniform(-18, 18), 0, 255))
                       for c in (196.0, 118.0, 132.0))
        return _PatientProfile(
            band=(top, bot),
            tissue=tissue,
            background=int(rng.uniform(232, 250)),
            noise_sigma=float(rng.uniform(3.0, 9.0)),
            gain=float(rng.uniform(0.78, 1.0)),
            falloff=int(rng.uniform(24, 50)),
        )


def _positive_counts(n_patients, frames_per_patient, positive_fraction):
    """Deterministic per-patient positive counts summing to round(frac*N)."""
    total = n_patients * frames_per_patient
    n_pos = int(total * positive_fraction + 0.5)
    base, extra = divmod(n_pos, n_patients)
    counts = [min(frames_per_patient, base + (1 if i < extra else 0))
              for i in range(n_patients)]
    # if per-patient capping dropped positives, backfill where room remains
    deficit = n_pos - sum(counts)
    i = 0
    while deficit > 0 and i < n_patients:
        room = frames_per_patient - counts[i]
        take = min(room, deficit)
        counts[i] += take
        deficit -= take
        i += 1
    return counts


def generate_dataset(n_patients, frames_per_patient, positive_fraction, seed,
                     out_dir, holdout_patients=0, holdout_positive_fraction=None,
                     width=1440, height=1080):
    """Write a per-patient synthetic dataset and its manifest.

    The first (n_patients - holdout_patients) patients go to the train
    split, the rest to holdout (patient-disjoint by construction). Returns
    the manifest; frames are PNGs under out_dir/<patient_id>/.
    """
    if n_patients < 2:
        raise InvalidParams("need at least 2 patients")
    if frames_per_patient < 1:
        raise InvalidParams("frames_per_patient must be >= 1")
    if not (0.0 <= positive_fraction <= 1.0):
        raise InvalidParams("positive_fraction must be in [0, 1]")
    if not (0 <= holdout_patients < n_patients):
        raise InvalidParams("holdout_patients must leave at least one train patient")
    if holdout_positive_fraction is None:
        holdout_positive_fraction = positive_fraction

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed % 2**64)
    n_train_pat = n_patients - holdout_patients
    pos_train = _positive_counts(n_train_pat, frames_per_patient, positive_fraction)
    pos_hold = (_positive_counts(holdout_patients, frames_per_patient, holdout_positive_fraction)
                if holdout_patients else [])

    records = []
    for ip in range(n_patients):
        in_holdout = ip >= n_train_pat
        profile = _PatientProfile.draw(rng, width, height)
        n_pos = pos_hold[ip - n_train_pat] if in_holdout else pos_train[ip]
        positive_slots = set(rng.permutation(frames_per_patient)[:n_pos].tolist())
        patient_id = f"synthpat{ip:02d}"
        for j in range(frames_per_patient):
            frame_seed = int(rng.integers(0, 2**63))
            if j in positive_slots:
                fully_perfused = rng.random() < 0.25
                boundary = None if fully_perfused else int(rng.uniform(0.35, 0.90) * width)
                gain = float(np.clip(profile.gain * rng.uniform(0.95, 1.05), 0.7, 1.0))
            else:
                boundary = None
                gain = 0.0
            params = SynthParams(
                width=width, height=height, colon_band=profile.band,
                boundary_x=boundary, falloff_width=profile.falloff,
                fluorescence_gain=gain, noise_sigma=profile.noise_sigma,
                background_brightness=profile.background,
                distal_direction=DISTAL_INCREASING, seed=frame_seed,
                tissue_color=profile.tissue,
            )
            frame = generate_frame(params)
            frame_id = f"p{ip:02d}_f{j:04d}"
            path = out_dir / patient_id / f"{frame_id}.png"
            imgio.save_image(frame.image, path)
            records.append(FrameRecord(
                frame_id=frame_id,
                patient_id=patient_id,
                camera_id=CAMERA_SYNTHETIC,
                path=str(path),
                label=frame.truth_label,
                split=SPLIT_HOLDOUT if in_holdout else SPLIT_TRAIN,
                width=width,
                height=height,
                truth_boundary_x=frame.truth_boundary_x,
            ))

    manifest = DatasetManifest(records=tuple(records))
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest
