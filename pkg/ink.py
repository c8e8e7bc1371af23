import json
import math
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np


class InkParseError(ValueError):
    """Malformed ink bytes. `offset` is a byte offset, `trace_index` an InkML trace."""

    def __init__(self, message, offset=None, trace_index=None):
        super().__init__(message)
        self.offset = offset
        self.trace_index = trace_index


class InkStructureError(ValueError):
    pass


class Level(str, Enum):
    WORD = "word"
    LINE = "line"


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Stroke:
    points: Tuple[Point, ...]

    def __post_init__(self):
        if len(self.points) == 0:
            raise InkStructureError("a stroke needs at least one point")
        for idx, p in enumerate(self.points):
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise ValueError(f"non-finite coordinate at point {idx}: ({p.x}, {p.y})")

    def __len__(self):
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64).reshape(-1, 2)


@dataclass(frozen=True)
class InkSample:
    id: str
    strokes: Tuple[Stroke, ...]
    transcript: str
    level: Level = Level.WORD

    def __post_init__(self):
        if not self.strokes:
            raise InkStructureError(f"sample {self.id!r} has no strokes")
        if not self.transcript.strip():
            raise InkStructureError(f"sample {self.id!r} has an empty transcript")
        object.__setattr__(self, "transcript", unicodedata.normalize("NFC", self.transcript))
        object.__setattr__(self, "level", Level(self.level))

    @property
    def num_points(self) -> int:
        return sum(len(s) for s in self.strokes)


@dataclass(frozen=True)
class NormalizationConfig:
    margin: int = 8
    target_height: Optional[int] = None

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError(f"margin must be non-negative, got {self.margin}")
        if self.target_height is not None and self.target_height < 2 * self.margin + 1:
            raise ValueError(f"target_height {self.target_height} is below 2*margin+1 = {2 * self.margin + 1}")


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _make_strokes(raw_strokes, where=""):
    if not isinstance(raw_strokes, list):
        raise InkStructureError(f"{where}`strokes` must be an array")
    if len(raw_strokes) == 0:
        raise InkStructureError(f"{where}`strokes` is empty")
    strokes = []
    for s_idx, raw in enumerate(raw_strokes):
        if not isinstance(raw, list) or len(raw) == 0:
            raise InkStructureError(f"{where}stroke {s_idx} must be a non-empty array of [x, y] pairs")
        points = []
        for p_idx, pair in enumerate(raw):
            if not isinstance(pair, list) or len(pair) < 2 or not all(_is_number(v) for v in pair[:2]):
                raise InkStructureError(f"{where}stroke {s_idx} point {p_idx} is not an [x, y] number pair")
            try:
                x, y = float(pair[0]), float(pair[1])  # extra channels are ignored
            except OverflowError:
                x = y = math.inf
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"{where}non-finite coordinate in stroke {s_idx} point {p_idx}")
            points.append(Point(x, y))
        strokes.append(Stroke(tuple(points)))
    return tuple(strokes)


def parse_ink_record(data: bytes) -> InkSample:
    """Parse one native ink record (a JSON object on a single line)."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise InkParseError(f"invalid UTF-8 at byte {e.start}", offset=e.start) from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[:e.pos].encode("utf-8"))
        raise InkParseError(f"malformed record at byte {offset}: {e.msg}", offset=offset) from e

    if not isinstance(obj, dict):
        raise InkStructureError("an ink record must be a JSON object")
    for key in ("id", "transcript", "strokes"):
        if key not in obj:
            raise InkStructureError(f"record is missing `{key}`")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise InkStructureError("`id` must be a non-empty string")
    if not isinstance(obj["transcript"], str):
        raise InkStructureError(f"record {obj['id']!r}: `transcript` must be a string")
    level = obj.get("level", Level.WORD.value)
    if level not in (Level.WORD.value, Level.LINE.value):
        raise InkStructureError(f"record {obj['id']!r}: unknown level {level!r}")

    strokes = _make_strokes(obj["strokes"], where=f"record {obj['id']!r}: ")
    return InkSample(id=obj["id"], strokes=strokes, transcript=obj["transcript"], level=Level(level))


def serialize_ink_record(sample: InkSample) -> bytes:
    record = {
        "id": sample.id,
        "transcript": sample.transcript,
        "level": sample.level.value,
        "strokes": [[[p.x, p.y] for p in stroke.points] for stroke in sample.strokes],
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _local(tag):
    return tag.rsplit("}", 1)[-1]


def parse_inkml_subset(data: bytes, default_id: Optional[str] = None) -> InkSample:
    """Read the InkML subset: `<trace>` elements with "x y" pairs separated by
    commas and an `<annotation type="transcription">`. Only the first two
    channels of each pair are used."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as e:
        raise InkParseError(f"malformed InkML at line {e.position[0]}, column {e.position[1]}") from e

    annotations = {}
    traces = []
    for element in root.iter():
        tag = _local(element.tag)
        if tag == "annotation":
            annotations.setdefault(element.attrib.get("type"), element.text or "")
        elif tag == "trace":
            traces.append(element)

    if "transcription" not in annotations:
        raise InkStructureError("InkML document has no transcription annotation")
    if not traces:
        raise InkStructureError("InkML document has no traces")

    strokes = []
    for t_idx, trace in enumerate(traces):
        points = []
        for chunk in (trace.text or "").strip().split(","):
            tokens = chunk.split()
            if len(tokens) < 2:
                raise InkParseError(f"trace {t_idx}: expected an \"x y\" pair, got {chunk.strip()!r}",
                                    trace_index=t_idx)
            try:
                x, y = float(tokens[0]), float(tokens[1])
            except ValueError as e:
                raise InkParseError(f"trace {t_idx}: non-numeric coordinate in {chunk.strip()!r}",
                                    trace_index=t_idx) from e
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"trace {t_idx}: non-finite coordinate in {chunk.strip()!r}")
            points.append(Point(x, y))
        strokes.append(Stroke(tuple(points)))

    sample_id = annotations.get("sampleId") \
        or root.attrib.get("{http://www.w3.org/XML/1998/namespace}id") \
        or default_id
    if not sample_id:
        raise InkStructureError("InkML document carries no sample id")
    level = annotations.get("level", Level.WORD.value).strip() or Level.WORD.value
    if level not in (Level.WORD.value, Level.LINE.value):
        raise InkStructureError(f"unknown level {level!r}")
    return InkSample(id=sample_id.strip(), strokes=tuple(strokes),
                     transcript=annotations["transcription"], level=Level(level))


def to_inkml(sample: InkSample) -> bytes:
    ns = "http://www.w3.org/2003/InkML"
    ET.register_namespace("", ns)
    root = ET.Element(f"{{{ns}}}ink")
    for kind, text in (("transcription", sample.transcript), ("sampleId", sample.id), ("level", sample.level.value)):
        annotation = ET.SubElement(root, f"{{{ns}}}annotation", {"type": kind})
        annotation.text = text
    group = ET.SubElement(root, f"{{{ns}}}traceGroup")
    for idx, stroke in enumerate(sample.strokes):
        trace = ET.SubElement(group, f"{{{ns}}}trace", {"id": str(idx)})
        trace.text = ", ".join(f"{p.x!r} {p.y!r}" for p in stroke.points)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def bounding_box(strokes: Sequence[Stroke]) -> Tuple[float, float, float, float]:
    arrays = [s.as_array() for s in strokes]
    if not arrays or sum(len(a) for a in arrays) == 0:
        raise ValueError("bounding box of zero points")
    coords = np.concatenate(arrays, axis=0)
    min_x, min_y = coords.min(axis=0)
    max_x, max_y = coords.max(axis=0)
    return float(min_x), float(min_y), float(max_x), float(max_y)


def normalize_geometry(sample: InkSample, config: NormalizationConfig) -> InkSample:
    """Move the sample's top-left corner to (margin, margin), optionally
    scaling it uniformly so the box height becomes target_height - 2*margin."""
    min_x, min_y, max_x, max_y = bounding_box(sample.strokes)
    scale = 1.0
    if config.target_height is not None:
        span = config.target_height - 2 * config.margin
        height, width = max_y - min_y, max_x - min_x
        if height > 0:
            scale = span / height
        elif width > 0:
            scale = span / width
    margin = float(config.margin)

    strokes = []
    for stroke in sample.strokes:
        moved = (stroke.as_array() - (min_x, min_y)) * scale + margin
        strokes.append(Stroke(tuple(Point(float(x), float(y)) for x, y in moved)))
    return InkSample(id=sample.id, strokes=tuple(strokes), transcript=sample.transcript, level=sample.level)
