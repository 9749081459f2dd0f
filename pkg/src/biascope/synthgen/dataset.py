"""Dataset builds, manifests (``manifest.jsonl``) and image I/O."""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from biascope.errors import DegenerateAttractor, UnsupportedFamily
from biascope.synthgen import cue, statistical
from biascope.synthgen.ifs import IfsSystem, render_fractal, sample_ifs

MANIFEST_NAME = "manifest.jsonl"
IMAGE_RETRIES = 100
FULL_DATASET_SIZE = 95_000
FULL_FRACTAL_CATEGORIES = 125
FULL_IMAGES_PER_CATEGORY = 1000
CUE_BENCHMARK_SIZE = 1200
FRACTAL_ROTATION = 15.0


class GeneratorFamily(str, Enum):
    Fractal = "Fractal"
    RandomSmooth = "RandomSmooth"
    HighFreq = "HighFreq"
    Sparse = "Sparse"
    Oriented = "Oriented"
    CueConflict = "CueConflict"


STATISTICAL = {
    GeneratorFamily.RandomSmooth,
    GeneratorFamily.HighFreq,
    GeneratorFamily.Sparse,
    GeneratorFamily.Oriented,
}


def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed from a tuple of integers."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def gen_statistical_image(family, seed: int, size: int = 64) -> np.ndarray:
    family = GeneratorFamily(family)
    if family not in STATISTICAL:
        raise UnsupportedFamily(f"{family.value} is not a statistical family")
    img = statistical.GENERATORS[family.value](np.random.default_rng(seed), size)
    check_image(img)
    return img


def check_image(img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"image must be HxWx(1|3), got {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
        raise ValueError("image values must be finite and in [0, 1]")


@dataclass
class ManifestEntry:
    id: str
    file: str
    family: str
    seed: int
    class_label: int | None = None
    shape_label: int | None = None
    texture_label: int | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def validate(self) -> None:
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest ids are not unique")
        for e in self.entries:
            if e.family == GeneratorFamily.CueConflict.value:
                if e.shape_label is None or e.texture_label is None:
                    raise ValueError(f"{e.id}: cue-conflict entry lacks dual labels")
                if e.shape_label == e.texture_label:
                    raise ValueError(f"{e.id}: shape and texture labels coincide")
            if e.family == GeneratorFamily.Fractal.value and e.class_label is None:
                raise ValueError(f"{e.id}: fractal entry lacks class_label")

    def subset(self, entries: Iterable[ManifestEntry]) -> DatasetManifest:
        return DatasetManifest(list(entries), self.root)

    def path_of(self, entry: ManifestEntry) -> Path:
        return (self.root or Path(".")) / entry.file

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / MANIFEST_NAME
        lines = [json.dumps(asdict(e), ensure_ascii=False) for e in self.entries]
        tmp = path.with_suffix(".tmp")
        tmp.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        os.replace(tmp, path)
        return path

    @classmethod
    def load(cls, path) -> DatasetManifest:
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entries.append(ManifestEntry(**json.loads(line)))
        return cls(entries, path.parent)


def save_png(img: np.ndarray, path) -> None:
    check_image(img)
    q = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    mode = "L" if q.shape[2] == 1 else "RGB"
    Image.fromarray(q[:, :, 0] if mode == "L" else q, mode=mode).save(path, optimize=False)


def load_png(path, channels: int | None = None) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    arr = arr[:, :, :3]
    if channels == 3 and arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    elif channels == 1 and arr.shape[2] == 3:
        arr = (arr @ np.array([0.299, 0.587, 0.114], dtype=np.float32))[:, :, None]
    return arr


def load_images(manifest: DatasetManifest, channels: int | None = None) -> np.ndarray:
    """Stack every manifest image into a float32 array [N, H, W, C]."""
    return np.stack([load_png(manifest.path_of(e), channels) for e in manifest.entries])


# --- builds ----------------------------------------------------------------


def _cue_pairs(n_shapes: int) -> list[tuple[int, int]]:
    return [(s, t) for s in range(n_shapes) for t in range(cue.N_CLASSES) if s != t]


def _render_fractal_entry(ifs_json: dict, seed: int, size: int) -> np.ndarray:
    ifs = IfsSystem.from_json(ifs_json)
    for attempt in range(IMAGE_RETRIES):
        try:
            return render_fractal(
                ifs, size, 10 * size * size, derive_seed(seed, attempt), FRACTAL_ROTATION
            )
        except DegenerateAttractor:
            continue
    raise DegenerateAttractor(f"image seed {seed}: {IMAGE_RETRIES} retries exhausted")


def _render_job(job) -> np.ndarray:
    kind, args = job
    if kind == "fractal":
        return _render_fractal_entry(*args)
    if kind == "cue":
        return cue.render_cue_conflict(*args).image
    return gen_statistical_image(*args)


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("BIASCOPE_THREADS", "1") or 0)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def build_dataset(
    family,
    n: int,
    size: int,
    out_dir,
    seed: int,
    n_classes: int | None = None,
    workers: int | None = None,
) -> DatasetManifest:
    """Render ``n`` images of one family into ``out_dir`` and write the manifest.

    ``n_classes`` is the number of IFS categories for Fractal builds and the
    number of shape classes used for CueConflict builds.
    """
    family = GeneratorFamily(family)
    if n < 1:
        raise ValueError("n must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    entries: list[ManifestEntry] = []
    jobs = []
    if family is GeneratorFamily.Fractal:
        n_classes = min(n_classes or FULL_FRACTAL_CATEGORIES, n)
        systems = [sample_ifs(derive_seed(seed, 0xF2AC, c)).to_json() for c in range(n_classes)]
        (out_dir / "ifs_systems.json").write_text(json.dumps(systems, indent=1), encoding="utf-8")
    elif family is GeneratorFamily.CueConflict:
        n_classes = n_classes or cue.N_CLASSES
        if not 1 <= n_classes <= cue.N_CLASSES:
            raise ValueError("CueConflict n_classes must be in 1..8")
        pairs = _cue_pairs(n_classes)
        order = np.random.default_rng(derive_seed(seed, 0xC0E)).permutation(len(pairs))

    for i in range(n):
        img_seed = derive_seed(seed, i)
        entry = ManifestEntry(
            id=f"{family.value.lower()}-{i:06d}",
            file=f"images/{family.value.lower()}-{i:06d}.png",
            family=family.value,
            seed=img_seed,
        )
        if family is GeneratorFamily.Fractal:
            entry.class_label = i % n_classes
            jobs.append(("fractal", (systems[entry.class_label], img_seed, size)))
        elif family is GeneratorFamily.CueConflict:
            # cycle through a seeded ordering of all admissible (shape, texture) pairs
            s, t = pairs[order[i % len(pairs)]]
            entry.shape_label, entry.texture_label, entry.class_label = s, t, s
            jobs.append(("cue", (s, t, img_seed, size)))
        else:
            jobs.append(("stat", (family, img_seed, size)))
        entries.append(entry)

    n_workers = _worker_count(workers)
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            images = pool.map(_render_job, jobs, chunksize=16)
            for entry, img in zip(entries, images):
                save_png(img, out_dir / entry.file)
    else:
        for entry, job in zip(entries, jobs):
            save_png(_render_job(job), out_dir / entry.file)

    manifest = DatasetManifest(entries, out_dir)
    manifest.validate()
    manifest.write(out_dir)
    return manifest
