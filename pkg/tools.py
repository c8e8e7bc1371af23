import json
import os
from typing import List

import numpy as np
from PIL import Image
from tqdm import tqdm

from color_model import BetaParams, ColorModel
from ink import InkParseError, InkSample, parse_ink_record, parse_inkml_subset
from metrics import EvalPair

IMAGE_SUFFIXES = (".pgm", ".png")


def load_ink(ink_path) -> List[InkSample]:
    """Load samples from a native .jsonl file, one .inkml file or a folder of .inkml files."""
    if os.path.isdir(ink_path):
        samples = []
        for filename in tqdm(sorted(os.listdir(ink_path)), desc="loading inkml...."):
            if filename.endswith(".inkml"):
                samples.append(load_inkml(os.path.join(ink_path, filename)))
        return samples
    if ink_path.endswith(".inkml"):
        return [load_inkml(ink_path)]

    samples = []
    with open(ink_path, 'rb') as f:
        for line_no, line in enumerate(tqdm(f, desc="loading ink...."), start=1):
            if not line.strip():
                continue
            try:
                samples.append(parse_ink_record(line.rstrip(b"\r\n")))
            except InkParseError as e:
                raise InkParseError(f"{ink_path}:{line_no}: {e}", offset=e.offset) from e
            except ValueError as e:
                raise type(e)(f"{ink_path}:{line_no}: {e}") from e
    return samples


def load_inkml(path) -> InkSample:
    with open(path, 'rb') as f:
        data = f.read()
    stem = os.path.splitext(os.path.basename(path))[0]
    try:
        return parse_inkml_subset(data, default_id=stem)
    except ValueError as e:
        raise type(e)(f"{path}: {e}") from e


def read_gray_image(path) -> np.ndarray:
    """8-bit grayscale raster of a PGM or PNG file, shape (height, width)."""
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def write_image(path, image: np.ndarray):
    """Write a grayscale raster; the format follows the suffix (.pgm is binary P5)."""
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).save(path)


def save_color_model(path, model: ColorModel):
    payload = {
        "subsets": list(model.subsets) or [str(i) for i in range(model.size)],
        "stroke": [[p.alpha, p.beta] for p in model.stroke_dists],
        "background": [[p.alpha, p.beta] for p in model.bg_dists],
    }
    with open(path, 'w', encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)
        f.write("\n")


def load_color_model(path) -> ColorModel:
    with open(path, 'r', encoding="utf-8") as f:
        payload = json.load(f)
    try:
        return ColorModel(stroke_dists=tuple(BetaParams(a, b) for a, b in payload["stroke"]),
                          bg_dists=tuple(BetaParams(a, b) for a, b in payload["background"]),
                          subsets=tuple(payload.get("subsets", ())))
    except (KeyError, TypeError) as e:
        raise ValueError(f"{path}: malformed color-model file ({e})") from e


def write_jsonl(path, rows):
    with open(path, 'w', encoding="utf-8") as f:
        for row in rows:
            f.write(f'{json.dumps(row, ensure_ascii=False)}\n')


def load_jsonl(path) -> List[dict]:
    rows = []
    with open(path, 'r', encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{line_no}: {e.msg}") from e
    return rows


def load_lines(path) -> List[str]:
    with open(path, 'r', encoding="utf-8") as f:
        return [line.rstrip("\r\n") for line in f]


def load_eval_pairs(refs_path, hyps_path=None) -> List[EvalPair]:
    """Aligned reference/hypothesis line files, or one JSONL file with
    id, reference and hypothesis fields when hyps_path is None."""
    if hyps_path is None:
        pairs = []
        for row_no, row in enumerate(load_jsonl(refs_path), start=1):
            try:
                pairs.append(EvalPair(reference=row["reference"], hypothesis=row["hypothesis"], id=str(row["id"])))
            except (KeyError, TypeError) as e:
                raise ValueError(f"{refs_path}: row {row_no}: missing or malformed field {e}") from e
        return pairs
    refs = load_lines(refs_path)
    hyps = load_lines(hyps_path)
    if len(refs) != len(hyps):
        raise ValueError(f"line count mismatch: {len(refs)} references vs {len(hyps)} hypotheses")
    return [EvalPair(reference=r, hypothesis=h, id=str(i)) for i, (r, h) in enumerate(zip(refs, hyps), start=1)]
