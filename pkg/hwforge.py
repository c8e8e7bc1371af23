import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field, replace
from typing import Optional

from tqdm import tqdm
from transformers import HfArgumentParser

from color_model import DEFAULT_CAP, build_color_model, extract_color_samples, merge_sample_sets
from ink import NormalizationConfig
from metrics import CharClass, char_frequency, cohen_kappa, corpus_score
from rendering import WidthMode, WidthModel
from tools import (IMAGE_SUFFIXES, load_color_model, load_eval_pairs, load_ink, load_jsonl, load_lines,
                   read_gray_image, save_color_model, write_image)
from transfer import (ManifestRecord, TransferConfig, derive_record_seed, generate_dataset, pack_hdf5,
                      transfer)

logger = logging.getLogger("hwforge")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
SEED_ENV = "HWFORGE_SEED"


class UsageError(Exception):
    pass


class CommandParser(HfArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class LoggingArguments:
    verbose: bool = field(default=False, metadata={"help": "Log debug messages to stderr."})


@dataclass
class TransferArguments:
    seed: Optional[int] = field(default=None, metadata={"help": f"Master seed (falls back to the config file, then ${SEED_ENV}, then 0)."})
    width_mode: str = field(default=WidthMode.CONSTANT.value,
                            metadata={"help": "Stroke width model.", "choices": [m.value for m in WidthMode]})
    m_min: int = field(default=2, metadata={"help": "Smallest maximum stroke thickness m drawn per image."})
    m_max: int = field(default=5, metadata={"help": "Largest maximum stroke thickness m drawn per image."})
    sigmoid_alpha: float = field(default=-0.1, metadata={"help": "Slope of the width sigmoid (per degree)."})
    sigmoid_beta: float = field(default=1.13, metadata={"help": "Offset of the width sigmoid."})
    theta_const: float = field(default=90.0, metadata={"help": "Angle in degrees used by the constant width mode."})
    margin: int = field(default=8, metadata={"help": "Blank margin around the ink in pixels."})
    target_height: Optional[int] = field(default=None, metadata={"help": "Rescale ink to this image height (default: keep scale)."})
    pad: Optional[str] = field(default=None, metadata={"help": "Pad every image to WxH pixels."})
    flat_color: bool = field(default=False, metadata={"help": "One color draw per class and image instead of one per pixel."})
    config: Optional[str] = field(default=None, metadata={"help": "JSON file with TransferConfig fields; flags override it."})


@dataclass
class FitColorsArguments:
    images_dir: str = field(metadata={"help": "Folder of reference images, one sub-folder per subset."})
    out: str = field(metadata={"help": "Color-model file to write."})
    cap: int = field(default=DEFAULT_CAP, metadata={"help": "Maximum samples per class and subset."})
    seed: int = field(default=0, metadata={"help": "Seed of the sample subsampling."})


@dataclass
class RenderArguments:
    ink: str = field(metadata={"help": "Ink file (.jsonl records, .inkml file or folder)."})
    colors: str = field(metadata={"help": "Color-model file."})
    out: str = field(metadata={"help": "Image to write (.pgm or .png)."})
    sample_id: Optional[str] = field(default=None, metadata={"help": "Record to render (default: the first one)."})


@dataclass
class GenerateArguments:
    ink: str = field(metadata={"help": "Ink file (.jsonl records, .inkml file or folder)."})
    colors: str = field(metadata={"help": "Color-model file."})
    out_dir: str = field(metadata={"help": "Output folder for images/ and manifest.jsonl."})
    jobs: Optional[int] = field(default=None, metadata={"help": "Rendering workers (default: number of CPUs)."})
    image_format: str = field(default="pgm", metadata={"help": "Image file format.", "choices": ["pgm", "png"]})
    split: Optional[str] = field(default=None, metadata={"help": "Split tag written to every manifest row."})
    hdf5: Optional[str] = field(default=None, metadata={"help": "Also pack all images into this HDF5 file."})


@dataclass
class ScoreArguments:
    refs: str = field(metadata={"help": "Reference file, one text per line (or paired JSONL when --hyps is absent)."})
    hyps: Optional[str] = field(default=None, metadata={"help": "Hypothesis file aligned with --refs by line."})


@dataclass
class StatsArguments:
    manifest: str = field(metadata={"help": "Manifest (JSONL) produced by generate."})
    char_class: str = field(default=CharClass.NUMERIC.value,
                            metadata={"help": "Character class to report.", "choices": [c.value for c in CharClass]})


@dataclass
class KappaArguments:
    a: str = field(metadata={"help": "Labels of the first annotator, one per line."})
    b: str = field(metadata={"help": "Labels of the second annotator, one per line."})


def _require_file(path, flag):
    if not os.path.exists(path):
        raise UsageError(f"{flag}: no such file or directory: {path}")


def parse_pad(value):
    if value is None:
        return None
    match = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", value)
    if match is None:
        raise UsageError(f"--pad expects WxH, got {value!r}")
    return int(match.group(1)), int(match.group(2))


_WIDTH_KEYS = ("sigmoid_alpha", "sigmoid_beta", "m_min", "m_max", "theta_const")


def _config_section(payload, name):
    section = payload.get(name, {})
    if not isinstance(section, dict):
        raise UsageError(f"--config: {name} must be an object")
    return section


def config_defaults(path):
    """Map a TransferConfig JSON file onto TransferArguments flag defaults."""
    _require_file(path, "--config")
    with open(path, 'r', encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f"--config: {path} is not valid JSON ({e})") from e
    if not isinstance(payload, dict):
        raise UsageError(f"--config: {path} must hold a JSON object")
    known = {"width_model", "normalization", "master_seed", "pad_to", "flat_color"}
    unknown = set(payload) - known
    if unknown:
        raise UsageError(f"--config: unknown field(s) {sorted(unknown)}")
    defaults = {}
    for key, value in _config_section(payload, "width_model").items():
        if key == "mode":
            defaults["width_mode"] = value
        elif key in _WIDTH_KEYS:
            defaults[key] = value
        else:
            raise UsageError(f"--config: unknown width_model field {key!r}")
    for key, value in _config_section(payload, "normalization").items():
        if key not in ("margin", "target_height"):
            raise UsageError(f"--config: unknown normalization field {key!r}")
        defaults[key] = value
    if "master_seed" in payload:
        defaults["seed"] = payload["master_seed"]
    pad_to = payload.get("pad_to")
    if pad_to is not None:
        if not isinstance(pad_to, list) or len(pad_to) != 2:
            raise UsageError(f"--config: pad_to must be [width, height], got {pad_to!r}")
        defaults["pad"] = f"{pad_to[0]}x{pad_to[1]}"
    if "flat_color" in payload:
        defaults["flat_color"] = bool(payload["flat_color"])
    return defaults


def build_transfer_config(args: TransferArguments) -> TransferConfig:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get(SEED_ENV, 0))
    width_model = WidthModel(mode=WidthMode(args.width_mode), sigmoid_alpha=args.sigmoid_alpha,
                             sigmoid_beta=args.sigmoid_beta, m_min=args.m_min, m_max=args.m_max,
                             theta_const=args.theta_const)
    normalization = NormalizationConfig(margin=args.margin, target_height=args.target_height)
    return TransferConfig(width_model=width_model, normalization=normalization, master_seed=seed,
                          pad_to=parse_pad(args.pad), flat_color=args.flat_color)


def discover_subsets(images_dir):
    """Subsets are the sub-folders of images_dir, in lexicographic order. A
    folder without sub-folders is one subset named after itself."""
    def images_in(folder):
        return [os.path.join(folder, name) for name in sorted(os.listdir(folder))
                if name.lower().endswith(IMAGE_SUFFIXES)]

    subdirs = sorted(name for name in os.listdir(images_dir) if os.path.isdir(os.path.join(images_dir, name)))
    if not subdirs:
        return [(os.path.basename(os.path.normpath(images_dir)), images_in(images_dir))]
    return [(name, images_in(os.path.join(images_dir, name))) for name in subdirs]


def cmd_fit_colors(args: FitColorsArguments):
    _require_file(args.images_dir, "--images_dir")
    if args.cap < 2:
        raise UsageError(f"--cap must be at least 2, got {args.cap}")

    fitted = []
    for subset, paths in discover_subsets(args.images_dir):
        per_image = []
        for path in tqdm(paths, desc=f"sampling {subset}...."):
            try:
                image = read_gray_image(path)
                key = f"{subset}/{os.path.basename(path)}"
                per_image.append(extract_color_samples(image, key, cap=args.cap, seed=args.seed))
            except (ValueError, OSError) as e:
                logger.warning("skipping %s: %s", path, e)
        if not per_image:
            logger.warning("subset %s has no usable images", subset)
            continue
        merged = merge_sample_sets(per_image, subset, cap=args.cap, seed=args.seed)
        try:
            build_color_model([merged])
        except ValueError as e:
            logger.warning("subset %s cannot be fitted: %s", subset, e)
            continue
        fitted.append(merged)

    if not fitted:
        raise ValueError(f"no subset of {args.images_dir} could be fitted")
    model = build_color_model(fitted)
    save_color_model(args.out, model)
    logger.info("wrote %d distribution pairs to %s", model.size, args.out)
    return EXIT_OK


def cmd_render(args: RenderArguments, transfer_args: TransferArguments):
    _require_file(args.ink, "--ink")
    _require_file(args.colors, "--colors")
    config = build_transfer_config(transfer_args)
    model = load_color_model(args.colors)
    samples = load_ink(args.ink)
    if not samples:
        raise ValueError(f"{args.ink} holds no samples")
    if args.sample_id is None:
        sample = samples[0]
    else:
        matches = [s for s in samples if s.id == args.sample_id]
        if not matches:
            raise ValueError(f"sample {args.sample_id!r} not found in {args.ink}")
        sample = matches[0]

    image, record = transfer(sample, model, config, derive_record_seed(config.master_seed, sample.id))
    write_image(args.out, image)
    record = replace(record, image_path=args.out)
    print(json.dumps(record.to_json(), ensure_ascii=False))
    return EXIT_OK


def cmd_generate(args: GenerateArguments, transfer_args: TransferArguments):
    _require_file(args.ink, "--ink")
    _require_file(args.colors, "--colors")
    config = build_transfer_config(transfer_args)
    model = load_color_model(args.colors)
    samples = load_ink(args.ink)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise UsageError(f"--jobs must be at least 1, got {jobs}")

    result = generate_dataset(samples, model, config, args.out_dir, jobs=jobs,
                              image_format=args.image_format, split=args.split)
    if args.hdf5:
        pack_hdf5(result.manifest, args.out_dir, args.hdf5)
    if result.failures:
        for sample_id, error in result.failures:
            print(f"failed: {sample_id}: {error}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_score(args: ScoreArguments):
    _require_file(args.refs, "--refs")
    if args.hyps is not None:
        _require_file(args.hyps, "--hyps")
    report = corpus_score(load_eval_pairs(args.refs, args.hyps))
    print(json.dumps(report.to_json()))
    return EXIT_OK


def cmd_stats(args: StatsArguments):
    _require_file(args.manifest, "--manifest")
    records = []
    for idx, row in enumerate(load_jsonl(args.manifest), start=1):
        try:
            records.append(ManifestRecord.from_json(row))
        except ValueError as e:
            raise ValueError(f"{args.manifest}: row {idx}: {e}") from e
    print(json.dumps(char_frequency(records, CharClass(args.char_class)), ensure_ascii=False))
    return EXIT_OK


def cmd_kappa(args: KappaArguments):
    _require_file(args.a, "--a")
    _require_file(args.b, "--b")
    labels_a, labels_b = load_lines(args.a), load_lines(args.b)
    print(json.dumps({"kappa": cohen_kappa(labels_a, labels_b), "count": len(labels_a)}))
    return EXIT_OK


COMMANDS = {
    "fit-colors": ((FitColorsArguments,), cmd_fit_colors, "Fit stroke/background beta distributions per image subset."),
    "render": ((RenderArguments, TransferArguments), cmd_render, "Render one ink sample into an image."),
    "generate": ((GenerateArguments, TransferArguments), cmd_generate, "Render a whole ink corpus with a manifest."),
    "score": ((ScoreArguments,), cmd_score, "Character and word error rates of recognizer output."),
    "stats": ((StatsArguments,), cmd_stats, "Character-class frequencies of a manifest's transcripts."),
    "kappa": ((KappaArguments,), cmd_kappa, "Cohen's kappa between two annotators."),
}


def usage():
    lines = ["usage: hwforge.py <command> [flags]", "", "commands:"]
    lines += [f"  {name:<11} {help_text}" for name, (_, _, help_text) in COMMANDS.items()]
    lines.append("\nRun `hwforge.py <command> --help` for the flags of a command.")
    return "\n".join(lines)


def parse_command(argv):
    if not argv or argv[0] not in COMMANDS:
        raise UsageError(usage() if not argv else f"unknown command {argv[0]!r}\n{usage()}")
    name, rest = argv[0], argv[1:]
    arg_types, handler, help_text = COMMANDS[name]
    parser = CommandParser(arg_types + (LoggingArguments,), prog=f"hwforge.py {name}", description=help_text)

    if TransferArguments in arg_types:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(rest)
        if known.config:
            parser.set_defaults(**config_defaults(known.config))

    try:
        parsed = parser.parse_args_into_dataclasses(args=rest, look_for_args_file=False)
    except ValueError as e:
        # unknown flags
        raise UsageError(f"{parser.prog}: {e}") from e
    return handler, parsed[:-1], parsed[-1]


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] in ("-h", "--help"):
        print(usage())
        return EXIT_OK
    try:
        handler, command_args, logging_args = parse_command(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return e.code if isinstance(e.code, int) else EXIT_OK

    logging.basicConfig(format='%(asctime)s %(levelname)s %(message)s',
                        level=logging.DEBUG if logging_args.verbose else logging.INFO,
                        stream=sys.stderr)
    try:
        return handler(*command_args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as e:
        logger.error("%s", e)
        return EXIT_DATA


if __name__ == '__main__':
    sys.exit(main())
