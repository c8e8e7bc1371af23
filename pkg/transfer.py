import hashlib
import logging
import os
import re
from dataclasses import dataclass, field, asdict, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import h5py
import numpy as np
from torch.utils.data import DataLoader, Dataset
from tqdm import tqdm

from color_model import BetaParams, ColorModel, choose_distribution_index, sample_beta
from ink import InkSample, Level, NormalizationConfig, bounding_box, normalize_geometry
from rendering import INK, PAPER, WidthMode, WidthModel, render_binary
from tools import read_gray_image, write_image, write_jsonl

logger = logging.getLogger(__name__)

UINT64_MASK = (1 << 64) - 1


class ColorContractError(ValueError):
    pass


class ImageSizeError(ValueError):
    pass


@dataclass(frozen=True)
class TransferConfig:
    width_model: WidthModel = field(default_factory=WidthModel)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    master_seed: int = 0
    pad_to: Optional[Tuple[int, int]] = None
    flat_color: bool = False

    def __post_init__(self):
        if not 0 <= self.master_seed <= UINT64_MASK:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.pad_to is not None:
            pad_w, pad_h = self.pad_to
            if pad_w <= 0 or pad_h <= 0:
                raise ValueError(f"pad_to must be positive, got {pad_w}x{pad_h}")
            object.__setattr__(self, "pad_to", (int(pad_w), int(pad_h)))


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    image_path: str
    transcript: str
    level: Level
    seed: int
    m_value: float
    dist_index: int
    width_mode: WidthMode
    split: Optional[str] = None

    def to_json(self):
        row = asdict(self)
        row["level"] = self.level.value
        row["width_mode"] = self.width_mode.value
        if self.split is None:
            del row["split"]
        return row

    @classmethod
    def from_json(cls, row):
        try:
            return cls(id=row["id"], image_path=row["image_path"], transcript=row["transcript"],
                       level=Level(row["level"]), seed=int(row["seed"]), m_value=row["m_value"],
                       dist_index=int(row["dist_index"]), width_mode=WidthMode(row["width_mode"]),
                       split=row.get("split"))
        except (KeyError, TypeError) as e:
            raise ValueError(f"manifest row is missing or has a malformed field {e}") from e


@dataclass
class GenerationResult:
    manifest: List[ManifestRecord]
    failures: List[Tuple[str, str]]

    @property
    def ok(self) -> bool:
        return not self.failures


def derive_record_seed(master_seed: int, sample_id: str) -> int:
    digest = hashlib.blake2b(f"{master_seed}\x00{sample_id}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _beta_bytes(params: BetaParams, rng: np.random.Generator, count: int, flat: bool) -> np.ndarray:
    # x * 255 rounded half up
    if flat:
        value = int(np.floor(sample_beta(params, rng) * 255.0 + 0.5))
        return np.full(count, value, dtype=np.uint8)
    draws = sample_beta(params, rng, size=count)
    return np.clip(np.floor(draws * 255.0 + 0.5), 0, 255).astype(np.uint8)


def render_color(image: np.ndarray, model: ColorModel, rng: np.random.Generator,
                 dist_index: Optional[int] = None, flat_color: bool = False) -> np.ndarray:
    """Replace ink pixels with stroke-color draws and paper pixels with
    background-color draws, both from the same distribution index.

    Each pixel gets its own draw unless flat_color is set, in which case one
    draw per class colors the whole image."""
    if not np.isin(image, (INK, PAPER)).all():
        raise ColorContractError("binary image holds values other than 0 and 255")
    if dist_index is None:
        dist_index = choose_distribution_index(model, rng)
    if not 0 <= dist_index < model.size:
        raise ValueError(f"distribution index {dist_index} is out of range for {model.size} pairs")

    out = np.empty_like(image, dtype=np.uint8)
    stroke_mask = image == INK
    n_stroke = int(stroke_mask.sum())
    n_bg = image.size - n_stroke
    if n_stroke:
        out[stroke_mask] = _beta_bytes(model.stroke_dists[dist_index], rng, n_stroke, flat_color)
    if n_bg:
        out[~stroke_mask] = _beta_bytes(model.bg_dists[dist_index], rng, n_bg, flat_color)
    return out


def pad_image(image: np.ndarray, target_width: int, target_height: int, fill: int = PAPER) -> np.ndarray:
    """Extend the image to the right and bottom with `fill`; the original stays top-left."""
    height, width = image.shape
    if target_width < width or target_height < height:
        raise ImageSizeError(f"cannot pad a {width}x{height} image to {target_width}x{target_height}")
    if not 0 <= fill <= 255:
        raise ValueError(f"fill must be a byte value, got {fill}")
    padded = np.full((target_height, target_width), fill, dtype=np.uint8)
    padded[:height, :width] = image
    return padded


def ink_extent(sample: InkSample) -> Tuple[int, int]:
    """Smallest canvas holding every pixel centre a normalized sample touches."""
    _, _, max_x, max_y = bounding_box(sample.strokes)
    return int(np.floor(max_x + 0.5)) + 1, int(np.floor(max_y + 0.5)) + 1


def canvas_size(sample: InkSample, margin: int) -> Tuple[int, int]:
    """Canvas fitting a normalized sample: margin on every side, pixel centres on integers."""
    width, height = ink_extent(sample)
    return width + margin, height + margin


def transfer(sample: InkSample, model: ColorModel, config: TransferConfig,
             record_seed: int) -> Tuple[np.ndarray, ManifestRecord]:
    """normalize -> draw m -> binary raster (padded with paper) -> color."""
    rng = np.random.default_rng(record_seed)
    width_model = config.width_model
    margin = config.normalization.margin

    normalized = normalize_geometry(sample, config.normalization)
    canvas_w, canvas_h = canvas_size(normalized, margin)
    if config.pad_to is not None:
        pad_w, pad_h = config.pad_to
        ink_w, ink_h = ink_extent(normalized)
        if ink_w > pad_w or ink_h > pad_h:
            raise ImageSizeError(f"sample {sample.id!r} needs {ink_w}x{ink_h}, "
                                 f"larger than pad size {pad_w}x{pad_h}")
        # margin is trimmed where it would overflow the pad size
        canvas_w, canvas_h = min(canvas_w, pad_w), min(canvas_h, pad_h)

    m_value = int(rng.integers(width_model.m_min, width_model.m_max + 1))
    binary = render_binary(normalized.strokes, canvas_w, canvas_h, m_value, width_model)
    if config.pad_to is not None:
        # padded blank pixels get fresh background draws like the rest of the ground
        binary = pad_image(binary, config.pad_to[0], config.pad_to[1], fill=PAPER)
    dist_index = choose_distribution_index(model, rng)
    image = render_color(binary, model, rng, dist_index=dist_index, flat_color=config.flat_color)

    record = ManifestRecord(id=sample.id, image_path="", transcript=sample.transcript, level=sample.level,
                            seed=record_seed, m_value=m_value, dist_index=dist_index,
                            width_mode=width_model.mode)
    return image, record


_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


def image_filename(sample_id: str, image_format: str = "pgm") -> str:
    return f"{_UNSAFE.sub('_', sample_id)}.{image_format}"


class TransferDataset(Dataset):
    """Each item renders one sample and writes its image; items are independent."""

    def __init__(self, samples: Sequence[InkSample], model: ColorModel, config: TransferConfig,
                 output_dir: str, image_format: str = "pgm", split: Optional[str] = None):
        self.samples = samples
        self.model = model
        self.config = config
        self.output_dir = output_dir
        self.image_format = image_format
        self.split = split

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, item):
        sample = self.samples[item]
        rel_path = os.path.join("images", image_filename(sample.id, self.image_format))
        try:
            image, record = transfer(sample, self.model, self.config,
                                     derive_record_seed(self.config.master_seed, sample.id))
            write_image(os.path.join(self.output_dir, rel_path), image)
        except (ValueError, OSError) as e:
            return sample.id, None, f"{type(e).__name__}: {e}"
        return sample.id, replace(record, image_path=rel_path, split=self.split), None


def collate_records(batch):
    return batch


def generate_dataset(samples: Iterable[InkSample], model: ColorModel, config: TransferConfig,
                     output_dir: str, jobs: int = 1, image_format: str = "pgm", split: Optional[str] = None,
                     batch_size: int = 16) -> GenerationResult:
    """Render every sample into output_dir/images and write output_dir/manifest.jsonl.

    Record seeds depend only on (master_seed, id), so the output does not depend
    on `jobs` or on the order of the samples."""
    samples = list(samples)
    seen = {}
    for sample in samples:
        name = image_filename(sample.id, image_format)
        if name in seen:
            raise ValueError(f"duplicate sample id {sample.id!r} (collides with {seen[name]!r})")
        seen[name] = sample.id

    os.makedirs(os.path.join(output_dir, "images"), exist_ok=True)
    dataset = TransferDataset(samples, model, config, output_dir, image_format=image_format, split=split)
    loader = DataLoader(
        dataset,
        batch_size=batch_size,
        collate_fn=collate_records,
        shuffle=False,    # manifest follows input order
        drop_last=False,
        num_workers=jobs if jobs > 1 else 0,
    )

    manifest, failures = [], []
    for batch in tqdm(loader, desc="Rendering images", total=len(loader)):
        for sample_id, record, error in batch:
            if record is None:
                logger.error("record %s failed: %s", sample_id, error)
                failures.append((sample_id, error))
            else:
                manifest.append(record)

    write_jsonl(os.path.join(output_dir, "manifest.jsonl"), (r.to_json() for r in manifest))
    logger.info("wrote %d images to %s, %d failed", len(manifest), output_dir, len(failures))
    return GenerationResult(manifest=manifest, failures=failures)


def pack_hdf5(manifest: Sequence[ManifestRecord], output_dir: str, path: str):
    """Bundle the generated images and transcripts into one HDF5 file."""
    dt_image = h5py.vlen_dtype(np.dtype('uint8'))
    dt_text = h5py.string_dtype(encoding='utf-8')
    with h5py.File(path, "w") as f:
        images = f.create_dataset("images", (len(manifest),), dtype=dt_image)
        shapes = f.create_dataset("shapes", (len(manifest), 2), dtype=np.int32)
        f.create_dataset("ids", data=[r.id for r in manifest], dtype=dt_text)
        f.create_dataset("transcripts", data=[r.transcript for r in manifest], dtype=dt_text)
        for idx, record in enumerate(tqdm(manifest, desc="Packing hdf5")):
            image = read_gray_image(os.path.join(output_dir, record.image_path))
            images[idx] = image.ravel()
            shapes[idx] = image.shape
