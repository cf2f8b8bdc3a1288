"""Dataset corruption pipeline: plan, generate, write, regenerate, verify.

A corruption run is split into a pure *plan* (the manifest: per-image records
of p, epsilon, mode, clamp, stream identity and output location) and a pure
*generate* step that turns (manifest, dataset) into corrupted tensors. The
manifest alone is enough to regenerate every output bit-exactly, so
``regenerate`` is literally generation driven by a stored manifest, and a
parallel run with any worker count writes the same bytes as a serial one.

Stream discipline per group g under master seed S:

* training spec draw:   RngStream(S, g).generator(0)
* noise for spec slot k: RngStream(S, g).generator(1, k)

Test grids use one slot per (norm, severity) cell and share_group=1 by
default; training sets draw one spec per group of 8 consecutive images and
share one noise realization across the group.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .images import ImageTensor
from .norms import PNorm, lp_distance
from .rng import RngStream
from .sampler import CorruptionSpec, NoiseVector, RadialMode, apply_noise, l0_count, sample
from .sets import CorruptionSet
from . import tensorio

__all__ = [
    "Dataset",
    "CorruptionRecord",
    "CorruptionManifest",
    "VerificationReport",
    "MANIFEST_VERSION",
    "plan_corruption",
    "generate_corruptions",
    "corrupt_dataset",
    "regenerate",
    "write_output",
    "read_output",
    "verify_distance",
    "distance_bound",
    "STORAGE_QUANTA",
]

MANIFEST_VERSION = 1

# Per-component storage rounding bound: float32 round-off for raw archives,
# two-sided 8-bit quantization for PNG trees.
STORAGE_QUANTA = {"lpt1": 2.0**-24, "png8": 1.0 / 255.0}

# Relative slack the float64 sampler itself is allowed on the epsilon bound.
_SAMPLER_RTOL = 1e-9


class Dataset:
    """Ordered image collection with unique ids; all images same shape."""

    def __init__(self, items: Iterable[tuple[str, ImageTensor]]):
        self._items: dict[str, ImageTensor] = {}
        for image_id, tensor in items:
            tensorio.validate_image_id(image_id)
            if image_id in self._items:
                raise ValueError(f"duplicate image id {image_id!r}")
            self._items[image_id] = tensor

    @classmethod
    def from_arrays(cls, array: np.ndarray, ids: Sequence[str] | None = None) -> "Dataset":
        arr = np.asarray(array)
        if arr.ndim != 4:
            raise ValueError(f"expected (N, C, H, W), got shape {arr.shape}")
        if ids is None:
            ids = [f"img{i:05d}" for i in range(arr.shape[0])]
        if len(ids) != arr.shape[0]:
            raise ValueError("ids length must match the array")
        return cls((i, ImageTensor(a, a.shape)) for i, a in zip(ids, arr))

    @classmethod
    def load(cls, path: Path) -> "Dataset":
        path = Path(path)
        if (path / tensorio.ARCHIVE_NAME).exists():
            return cls(tensorio.read_archive_dir(path))
        return cls(tensorio.read_image_dir(path))

    def save(self, path: Path, storage: str = "lpt1") -> None:
        if storage == "lpt1":
            tensorio.write_archive_dir(path, self.items())
        elif storage == "png8":
            tensorio.write_image_dir(path, self.items())
        else:
            raise ValueError(f"unknown storage {storage!r}")

    def items(self) -> list[tuple[str, ImageTensor]]:
        return list(self._items.items())

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._items)

    def __getitem__(self, image_id: str) -> ImageTensor:
        return self._items[image_id]

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._items

    def __len__(self) -> int:
        return len(self._items)

    def common_shape(self) -> tuple[int, int, int]:
        if not self._items:
            raise ValueError("dataset is empty")
        shapes = {t.shape for t in self._items.values()}
        if len(shapes) != 1:
            raise ValueError(f"heterogeneous image shapes {sorted(shapes)}")
        return next(iter(shapes))


@dataclass(frozen=True)
class CorruptionRecord:
    """One corrupted output image and everything needed to regenerate it."""

    image_id: str
    group_id: int
    stream_index: int
    spec_slot: int
    p_text: str
    epsilon: float
    mode: str
    clamp: bool
    subdir: str

    def spec(self) -> CorruptionSpec:
        if self.p_text == "identity":
            return CorruptionSpec(None, 0.0, clamp=self.clamp)
        return CorruptionSpec(
            PNorm.parse(self.p_text), self.epsilon, RadialMode.parse(self.mode), self.clamp
        )


@dataclass
class CorruptionManifest:
    master_seed: int
    set_name: str
    profile: str
    intent: str
    share_group: int
    storage: str
    clamp_override: str  # "default" | "on" | "off"
    records: list[CorruptionRecord] = field(default_factory=list)
    version: int = MANIFEST_VERSION

    _COLUMNS = "image_id,group_id,stream_index,spec_slot,p,epsilon,mode,clamp,subdir"

    def serialize(self) -> str:
        lines = [
            "# lpcorrupt manifest",
            f"version={self.version}",
            f"master_seed={self.master_seed}",
            f"set_name={self.set_name}",
            f"profile={self.profile}",
            f"intent={self.intent}",
            f"share_group={self.share_group}",
            f"storage={self.storage}",
            f"clamp_override={self.clamp_override}",
            f"columns={self._COLUMNS}",
        ]
        for r in self.records:
            lines.append(
                f"{r.image_id},{r.group_id},{r.stream_index},{r.spec_slot},"
                f"{r.p_text},{r.epsilon!r},{r.mode},{'on' if r.clamp else 'off'},{r.subdir}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "CorruptionManifest":
        header: dict[str, str] = {}
        records: list[CorruptionRecord] = []
        in_header = True
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if in_header:
                if "=" not in line:
                    raise ValueError(f"manifest line {lineno}: expected key=value header")
                key, value = line.split("=", 1)
                header[key] = value
                if key == "columns":
                    if value != cls._COLUMNS:
                        raise ValueError(f"manifest line {lineno}: unsupported columns {value!r}")
                    in_header = False
                continue
            parts = line.split(",")
            if len(parts) != 9:
                raise ValueError(f"manifest line {lineno}: expected 9 fields, got {len(parts)}")
            records.append(
                CorruptionRecord(
                    image_id=parts[0],
                    group_id=int(parts[1]),
                    stream_index=int(parts[2]),
                    spec_slot=int(parts[3]),
                    p_text=parts[4],
                    epsilon=float(parts[5]),
                    mode=parts[6],
                    clamp=parts[7] == "on",
                    subdir=parts[8],
                )
            )
        missing = {"version", "master_seed", "set_name", "profile", "intent",
                   "share_group", "storage", "clamp_override"} - set(header)
        if missing:
            raise ValueError(f"manifest header missing {sorted(missing)}")
        version = int(header["version"])
        if version != MANIFEST_VERSION:
            raise ValueError(f"manifest version {version} unsupported (expected {MANIFEST_VERSION})")
        return cls(
            master_seed=int(header["master_seed"]),
            set_name=header["set_name"],
            profile=header["profile"],
            intent=header["intent"],
            share_group=int(header["share_group"]),
            storage=header["storage"],
            clamp_override=header["clamp_override"],
            records=records,
            version=version,
        )


def _effective_clamp(spec_clamp: bool, override: str) -> bool:
    if override == "default":
        return spec_clamp
    if override == "on":
        return True
    if override == "off":
        return False
    raise ValueError(f"clamp_override must be default/on/off, got {override!r}")


def plan_corruption(
    ids: Sequence[str],
    cset: CorruptionSet,
    seed: int,
    share_group: int | None = None,
    clamp_override: str = "default",
    storage: str = "lpt1",
) -> CorruptionManifest:
    """Build the full corruption plan for a dataset's image ids.

    Training intent draws one spec per group here (the draw is part of the
    plan and is recorded); grid intents enumerate every (norm, severity) cell.
    """
    if not ids:
        raise ValueError("dataset is empty")
    if storage not in STORAGE_QUANTA:
        raise ValueError(f"storage must be one of {sorted(STORAGE_QUANTA)}, got {storage!r}")
    if share_group is None:
        share_group = 8 if cset.intent == "training" else 1
    if share_group < 1:
        raise ValueError(f"share_group must be >= 1, got {share_group}")

    groups = [
        (g, list(ids[g * share_group : (g + 1) * share_group]))
        for g in range(math.ceil(len(ids) / share_group))
    ]
    manifest = CorruptionManifest(
        master_seed=int(seed),
        set_name=cset.name,
        profile=cset.profile,
        intent=cset.intent,
        share_group=int(share_group),
        storage=storage,
        clamp_override=clamp_override,
    )

    def add(group_id: int, members: list[str], slot: int, spec: CorruptionSpec, subdir: str) -> None:
        clamp = _effective_clamp(spec.clamp, clamp_override)
        for image_id in members:
            manifest.records.append(
                CorruptionRecord(
                    image_id=image_id,
                    group_id=group_id,
                    stream_index=group_id,
                    spec_slot=slot,
                    p_text=spec.p_text,
                    epsilon=spec.epsilon,
                    mode=str(spec.radial_mode),
                    clamp=clamp,
                    subdir=subdir,
                )
            )

    if cset.intent == "training":
        from .sets import draw_training_spec

        for group_id, members in groups:
            spec = draw_training_spec(cset, RngStream(seed, group_id).generator(0))
            add(group_id, members, 0, spec, "")
    else:
        for slot, (label, severity, spec) in enumerate(cset.layout()):
            subdir = f"{label}/s{severity:02d}"
            for group_id, members in groups:
                add(group_id, members, slot, spec, subdir)
    return manifest


def _record_units(manifest: CorruptionManifest) -> list[list[CorruptionRecord]]:
    """Contiguous runs sharing one noise realization: same (subdir, slot, group)."""
    units: list[list[CorruptionRecord]] = []
    key = None
    for record in manifest.records:
        k = (record.subdir, record.spec_slot, record.group_id)
        if k != key:
            units.append([])
            key = k
        units[-1].append(record)
    return units


def _materialize_unit(
    unit: list[CorruptionRecord], manifest: CorruptionManifest, dataset: Dataset
) -> list[tuple[CorruptionRecord, ImageTensor]]:
    head = unit[0]
    spec = head.spec()
    first = dataset[head.image_id]
    if spec.is_identity:
        noise: NoiseVector | None = None
    else:
        gen = RngStream(manifest.master_seed, head.stream_index).generator(1, head.spec_slot)
        noise = sample(first.size, spec, gen)
    out = []
    for record in unit:
        tensor = dataset[record.image_id]
        if noise is None:
            out.append((record, tensor.copy()))
        else:
            out.append((record, apply_noise(tensor, noise, record.clamp)))
    return out


def generate_corruptions(
    manifest: CorruptionManifest, dataset: Dataset, threads: int = 1
) -> Iterator[tuple[CorruptionRecord, ImageTensor]]:
    """Yield (record, corrupted image) in manifest order, bit-reproducibly.

    One noise realization is drawn per (subdir, slot, group) unit and shared by
    the unit's images. ``threads`` only parallelizes work; output order and
    bytes are identical for any value.
    """
    if manifest.version != MANIFEST_VERSION:
        raise ValueError(f"manifest version {manifest.version} unsupported")
    missing = {r.image_id for r in manifest.records if r.image_id not in dataset}
    if missing:
        raise ValueError(f"manifest names {len(missing)} image ids absent from the dataset, "
                         f"e.g. {sorted(missing)[:3]}")
    if len(manifest.records):
        dataset.common_shape()
    units = _record_units(manifest)
    if threads <= 1:
        for unit in units:
            yield from _materialize_unit(unit, manifest, dataset)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for result in pool.map(lambda u: _materialize_unit(u, manifest, dataset), units):
            yield from result


def corrupt_dataset(
    dataset: Dataset,
    cset: CorruptionSet,
    seed: int,
    share_group: int | None = None,
    clamp_override: str = "default",
    storage: str = "lpt1",
    threads: int = 1,
) -> tuple[CorruptionManifest, Iterator[tuple[CorruptionRecord, ImageTensor]]]:
    """Plan and generate in one call; returns the manifest and a lazy stream."""
    dataset.common_shape()
    manifest = plan_corruption(dataset.ids, cset, seed, share_group, clamp_override, storage)
    return manifest, generate_corruptions(manifest, dataset, threads)


def regenerate(
    manifest: CorruptionManifest, dataset: Dataset, threads: int = 1
) -> Iterator[tuple[CorruptionRecord, ImageTensor]]:
    """Reproduce a previous run's outputs bit-exactly from its manifest."""
    return generate_corruptions(manifest, dataset, threads)


MANIFEST_NAME = "manifest.txt"


def write_output(
    out_dir: Path,
    manifest: CorruptionManifest,
    stream: Iterable[tuple[CorruptionRecord, ImageTensor]],
) -> None:
    """Write corrupted outputs grouped by subdir, plus the manifest."""
    out_dir = Path(out_dir)
    by_subdir: dict[str, list[tuple[str, ImageTensor]]] = {}
    for record, tensor in stream:
        by_subdir.setdefault(record.subdir, []).append((record.image_id, tensor))
    for subdir, items in by_subdir.items():
        target = out_dir / subdir if subdir else out_dir
        if manifest.storage == "png8":
            tensorio.write_image_dir(target, items)
        else:
            tensorio.write_archive_dir(target, items)
    tensorio.write_text_atomic(out_dir / MANIFEST_NAME, manifest.serialize())


def read_output(out_dir: Path) -> tuple[CorruptionManifest, Mapping[str, Dataset]]:
    """Load a written corruption output: manifest plus per-subdir datasets."""
    out_dir = Path(out_dir)
    manifest = CorruptionManifest.parse((out_dir / MANIFEST_NAME).read_text())
    subdirs = sorted({r.subdir for r in manifest.records})
    datasets: dict[str, Dataset] = {}
    for subdir in subdirs:
        target = out_dir / subdir if subdir else out_dir
        datasets[subdir] = Dataset.load(target)
    return manifest, datasets


def distance_bound(p_text: str, epsilon: float, d: int, quantum: float) -> float:
    """Largest distance a faithful corruption can show after storage rounding.

    The sampler holds ||noise||_p <= eps*(1+1e-9) in float64; storing each
    component adds at most ``quantum`` absolute error (plus one float32
    round-off of relative size 2^-24 on unclamped magnitudes). Triangle
    inequality covers p >= 1; for p < 1 the power-sum is subadditive
    term-by-term, giving (eps^p + d*quantum^p)^(1/p).
    """
    if p_text == "identity":
        return quantum * d  # storage rounding only; distance should be ~0
    p = PNorm.parse(p_text)
    rel = (1.0 + _SAMPLER_RTOL) * (1.0 + 2.0 * 2.0**-24)
    if p.is_zero:
        return float(l0_count(epsilon, d))  # count bound, not a distance
    if p.is_inf:
        return epsilon * rel + quantum
    if p.value >= 1.0:
        return epsilon * rel + quantum * d ** (1.0 / p.value)
    return ((epsilon * rel) ** p.value + d * quantum**p.value) ** (1.0 / p.value)


@dataclass
class VerificationReport:
    n_checked: int
    violations: list[tuple[str, str, float, float]]  # (subdir, image_id, distance, bound)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_distance(
    original: Dataset,
    corrupted: Mapping[str, Dataset],
    manifest: CorruptionManifest,
) -> VerificationReport:
    """Check every record's corruption stays within its recorded budget.

    For p=0 the check is on the count of differing components; additive norms
    compare lp_distance against the storage-aware bound. PNG outputs are
    compared against the 8-bit-quantized original so storage rounding cancels.
    """
    quantum = STORAGE_QUANTA.get(manifest.storage)
    if quantum is None:
        raise ValueError(f"unknown storage {manifest.storage!r} in manifest")
    violations: list[tuple[str, str, float, float]] = []
    checked = 0
    quantized_cache: dict[str, ImageTensor] = {}
    for record in manifest.records:
        if record.image_id not in original:
            raise ValueError(f"original dataset is missing image {record.image_id!r}")
        if record.subdir not in corrupted or record.image_id not in corrupted[record.subdir]:
            raise ValueError(
                f"corrupted output is missing {record.image_id!r} under {record.subdir!r}"
            )
        base = original[record.image_id]
        if manifest.storage == "png8":
            if record.image_id not in quantized_cache:
                quantized_cache[record.image_id] = tensorio.dequantize_u8(tensorio.quantize_u8(base))
            base = quantized_cache[record.image_id]
        corr = corrupted[record.subdir][record.image_id]
        checked += 1
        d = base.size
        if record.p_text == "0":
            differing = int(np.count_nonzero(base.data != corr.data))
            budget = l0_count(record.epsilon, d)
            if differing > budget:
                violations.append((record.subdir, record.image_id, float(differing), float(budget)))
            continue
        if record.p_text == "identity":
            # pass-through records must match up to storage rounding alone
            dist = lp_distance(base.data, corr.data, PNorm(math.inf))
            if dist > quantum:
                violations.append((record.subdir, record.image_id, dist, quantum))
            continue
        dist = lp_distance(base.data, corr.data, PNorm.parse(record.p_text))
        bound = distance_bound(record.p_text, record.epsilon, d, quantum)
        if dist > bound:
            violations.append((record.subdir, record.image_id, dist, bound))
    return VerificationReport(n_checked=checked, violations=violations)
