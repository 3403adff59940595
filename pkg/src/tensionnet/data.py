"""Sample schema, embedding-file ingestion, splits, and synthetic data.

File format: line 1 is a JSON header carrying dimensions and provenance;
every following line is one JSON sample record. Floats survive the
round-trip exactly (json serializes Python floats via shortest repr).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError
from .nn import Rng

FORMAT_NAME = "embedding-dataset-v1"
FAKE_TYPES = ("fact_mismatch", "sentiment_mismatch", "both")
SPLITS = ("train", "val", "test")

# synthetic generator internals
LATENT_FACT = 8
LATENT_SENT = 4
EMBED_NOISE = 0.1
# mean-shift vs diffuse share of the conflict perturbation
SHIFT_WEIGHT = 0.8
DIFFUSE_WEIGHT = 0.6


@dataclass
class Sample:
    id: str
    e_T: np.ndarray
    e_I: np.ndarray
    e_Y: np.ndarray
    e_J: np.ndarray
    label: int  # fake=1, real=0
    split: str | None = None


@dataclass
class DatasetHeader:
    d_text: int
    d_image: int
    K: int
    p: int
    provenance: str = ""


@dataclass
class Dataset:
    header: DatasetHeader
    samples: list[Sample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def subset(self, split: str) -> list[Sample]:
        return [s for s in self.samples if s.split == split]

    def arrays(self, split: str | None = None) -> dict:
        """Stack samples (optionally one split) into dense arrays."""
        samples = self.samples if split is None else self.subset(split)
        if not samples:
            raise DataError(f"no samples in split {split!r}")
        return {
            "ids": [s.id for s in samples],
            "e_T": np.stack([s.e_T for s in samples]),
            "e_I": np.stack([s.e_I for s in samples]),
            "e_Y": np.stack([s.e_Y for s in samples]),
            "e_J": np.stack([s.e_J for s in samples]),
            "labels": np.array([s.label for s in samples], dtype=np.float64),
        }

    def sample_by_id(self, sample_id: str) -> Sample:
        for s in self.samples:
            if s.id == sample_id:
                return s
        raise DataError(f"no sample with id {sample_id!r}")


def _validate_sample(sample: Sample, header: DatasetHeader, where: str):
    checks = (
        ("e_T", sample.e_T, header.d_text),
        ("e_I", sample.e_I, header.d_image),
        ("e_Y", sample.e_Y, header.K),
        ("e_J", sample.e_J, header.p),
    )
    for name, arr, dim in checks:
        if arr.ndim != 1 or arr.shape[0] != dim:
            raise DataError(f"{where}: {name} has shape {arr.shape}, expected ({dim},)")
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{where}: {name} contains non-finite values")
    if not np.all((sample.e_Y == 0.0) | (sample.e_Y == 1.0)):
        raise DataError(f"{where}: e_Y must be binary")
    if np.any(np.abs(sample.e_J) > 1.0):
        raise DataError(f"{where}: e_J entries must lie in [-1, 1]")
    if sample.label not in (0, 1):
        raise DataError(f"{where}: label must be 0 (real) or 1 (fake)")
    if sample.split is not None and sample.split not in SPLITS:
        raise DataError(f"{where}: unknown split {sample.split!r}")


def save_dataset(dataset: Dataset, path: str):
    with open(path, "w") as fh:
        header = {
            "format": FORMAT_NAME,
            "d_text": dataset.header.d_text,
            "d_image": dataset.header.d_image,
            "K": dataset.header.K,
            "p": dataset.header.p,
            "provenance": dataset.header.provenance,
        }
        fh.write(json.dumps(header) + "\n")
        for s in dataset.samples:
            record = {
                "id": s.id,
                "e_T": s.e_T.tolist(),
                "e_I": s.e_I.tolist(),
                "e_Y": s.e_Y.tolist(),
                "e_J": s.e_J.tolist(),
                "label": int(s.label),
            }
            if s.split is not None:
                record["split"] = s.split
            fh.write(json.dumps(record) + "\n")


def load_dataset(path: str) -> Dataset:
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty file, missing header")
    try:
        raw_header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:1: malformed header: {exc}") from exc
    if raw_header.get("format") != FORMAT_NAME:
        raise DataError(f"{path}:1: unexpected format {raw_header.get('format')!r}")
    try:
        header = DatasetHeader(
            d_text=int(raw_header["d_text"]),
            d_image=int(raw_header["d_image"]),
            K=int(raw_header["K"]),
            p=int(raw_header["p"]),
            provenance=str(raw_header.get("provenance", "")),
        )
    except KeyError as exc:
        raise DataError(f"{path}:1: header missing key {exc}") from exc
    samples: list[Sample] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{where}: malformed record: {exc}") from exc
        try:
            sample = Sample(
                id=str(record["id"]),
                e_T=np.array(record["e_T"], dtype=np.float64),
                e_I=np.array(record["e_I"], dtype=np.float64),
                e_Y=np.array(record["e_Y"], dtype=np.float64),
                e_J=np.array(record["e_J"], dtype=np.float64),
                label=int(record["label"]),
                split=record.get("split"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{where}: bad record: {exc}") from exc
        if sample.id in seen_ids:
            raise DataError(f"{where}: duplicate sample id {sample.id!r}")
        seen_ids.add(sample.id)
        _validate_sample(sample, header, where)
        samples.append(sample)
    return Dataset(header=header, samples=samples)


@dataclass
class SynthSpec:
    n_samples: int = 2000
    d_text: int = 32
    d_image: int = 32
    K: int = 16
    p: int = 4
    seed: int = 0
    fake_fraction: float = 0.5
    conflict_strength: float = 2.0
    fake_type_mix: dict = field(
        default_factory=lambda: {
            "fact_mismatch": 1.0 / 3.0,
            "sentiment_mismatch": 1.0 / 3.0,
            "both": 1.0 / 3.0,
        }
    )

    def validate(self) -> "SynthSpec":
        if self.n_samples <= 0:
            raise ConfigurationError("n_samples must be positive")
        for name in ("d_text", "d_image", "K", "p"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if not (0.0 < self.fake_fraction < 1.0):
            raise ConfigurationError("fake_fraction must lie in (0, 1)")
        if self.conflict_strength < 0.0:
            raise ConfigurationError("conflict_strength must be >= 0")
        if set(self.fake_type_mix) - set(FAKE_TYPES):
            raise ConfigurationError(f"fake types must be among {FAKE_TYPES}")
        total = sum(self.fake_type_mix.values())
        if total <= 0:
            raise ConfigurationError("fake_type_mix must have positive mass")
        return self


def _allocate(total: int, fractions: list[float]) -> list[int]:
    """Largest-remainder allocation of `total` into integer counts."""
    raw = [f * total for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    remainder = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def generate_synthetic(spec: SynthSpec) -> Dataset:
    """Generate embeddings from a shared latent; fakes get a perturbed image side.

    Real samples share one latent between modalities, so text and image
    agree. Fake samples shift the image-side fact and/or tone latent by a
    perturbation of expected norm `conflict_strength`, part of it along a
    fixed direction so even a linear probe can see strong conflicts.
    """
    spec.validate()
    rng = Rng(spec.seed)
    gen_mix = rng.child(1)
    gen_latent = rng.child(2)
    gen_assign = rng.child(3)

    lf, ls = LATENT_FACT, LATENT_SENT
    mix_text = gen_mix.normal(0.0, 1.0 / np.sqrt(lf + ls), size=(spec.d_text, lf + ls))
    mix_image = gen_mix.normal(0.0, 1.0 / np.sqrt(lf + ls), size=(spec.d_image, lf + ls))
    obj_map = gen_mix.normal(0.0, 1.0, size=(spec.K, lf))
    tone_map = gen_mix.normal(0.0, 1.0, size=(spec.p, ls))
    fact_dir = gen_mix.normal(0.0, 1.0, size=lf)
    fact_dir /= np.linalg.norm(fact_dir)
    sent_dir = gen_mix.normal(0.0, 1.0, size=ls)
    sent_dir /= np.linalg.norm(sent_dir)

    n = spec.n_samples
    n_fake = int(round(spec.fake_fraction * n))
    labels = np.zeros(n, dtype=int)
    labels[gen_assign.permutation(n)[:n_fake]] = 1
    fake_positions = np.flatnonzero(labels == 1)
    mix_fracs = [spec.fake_type_mix.get(t, 0.0) for t in FAKE_TYPES]
    mix_fracs = [f / sum(mix_fracs) for f in mix_fracs]
    type_counts = _allocate(n_fake, mix_fracs)
    fake_types: dict[int, str] = {}
    cursor = 0
    for t, count in zip(FAKE_TYPES, type_counts):
        for pos in fake_positions[cursor:cursor + count]:
            fake_types[int(pos)] = t
        cursor += count

    z_fact = gen_latent.normal(size=(n, lf))
    z_sent = gen_latent.normal(size=(n, ls))
    noise_text = gen_latent.normal(0.0, EMBED_NOISE, size=(n, spec.d_text))
    noise_image = gen_latent.normal(0.0, EMBED_NOISE, size=(n, spec.d_image))
    pert_fact = gen_latent.normal(size=(n, lf))
    pert_sent = gen_latent.normal(size=(n, ls))

    sc = spec.conflict_strength
    samples: list[Sample] = []
    for idx in range(n):
        zf, zs = z_fact[idx], z_sent[idx]
        zf_img, zs_img = zf.copy(), zs.copy()
        ftype = fake_types.get(idx)
        if ftype in ("fact_mismatch", "both"):
            zf_img = zf + sc * (
                SHIFT_WEIGHT * fact_dir + DIFFUSE_WEIGHT * pert_fact[idx] / np.sqrt(lf)
            )
        if ftype in ("sentiment_mismatch", "both"):
            zs_img = zs + sc * (
                SHIFT_WEIGHT * sent_dir + DIFFUSE_WEIGHT * pert_sent[idx] / np.sqrt(ls)
            )
        e_T = mix_text @ np.concatenate([zf, zs]) + noise_text[idx]
        e_I = mix_image @ np.concatenate([zf_img, zs_img]) + noise_image[idx]
        e_Y = (obj_map @ zf_img > 0.0).astype(np.float64)
        e_J = np.clip(0.75 * (tone_map @ zs), -1.0, 1.0)
        tag = f"fake-{ftype}" if ftype else "real"
        samples.append(
            Sample(
                id=f"{tag}-{idx:05d}",
                e_T=e_T,
                e_I=e_I,
                e_Y=e_Y,
                e_J=e_J,
                label=int(labels[idx]),
            )
        )
    header = DatasetHeader(
        d_text=spec.d_text,
        d_image=spec.d_image,
        K=spec.K,
        p=spec.p,
        provenance=f"synthetic seed={spec.seed} sigma_c={sc}",
    )
    return Dataset(header=header, samples=samples)


def split_dataset(dataset: Dataset, fractions: tuple[float, float, float],
                  seed: int) -> Dataset:
    """Assign train/val/test splits, stratified by label, seeded shuffle."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError("split fractions must sum to 1")
    if any(f < 0 for f in fractions):
        raise ConfigurationError("split fractions must be non-negative")
    rng = Rng(seed)
    for label in (0, 1):
        idxs = [i for i, s in enumerate(dataset.samples) if s.label == label]
        if not idxs:
            continue
        order = rng.permutation(len(idxs))
        counts = _allocate(len(idxs), list(fractions))
        cursor = 0
        for split_name, count in zip(SPLITS, counts):
            for k in order[cursor:cursor + count]:
                dataset.samples[idxs[int(k)]].split = split_name
            cursor += count
    return dataset
