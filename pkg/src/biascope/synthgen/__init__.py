"""Synthetic dataset generators."""
from biascope.synthgen.cue import gen_cue_conflict, render_cue_conflict
from biascope.synthgen.dataset import (
    DatasetManifest,
    GeneratorFamily,
    ManifestEntry,
    build_dataset,
    gen_statistical_image,
    load_images,
)
from biascope.synthgen.ifs import AffineMap2D, IfsSystem, render_fractal, sample_ifs

__all__ = [
    "AffineMap2D",
    "DatasetManifest",
    "GeneratorFamily",
    "IfsSystem",
    "ManifestEntry",
    "build_dataset",
    "gen_cue_conflict",
    "gen_statistical_image",
    "load_images",
    "render_cue_conflict",
    "render_fractal",
    "sample_ifs",
]
