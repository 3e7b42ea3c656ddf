# -*- coding: utf-8 -*-
"""Main entry point for the finger-vein-pad CLI."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

from colorama import Fore, Style
from pydantic import ValidationError

from src.config.logging_config import setup_logging
from src.config.settings import PipelineConfig, PipelineMode, SynthConfig, settings
from src.core.errors import PadError, UsageError
from src.models.feature_models import DescriptorKind
from src.services.pipeline_service import (
    PadPipeline,
    decompose_to_dumps,
    export_det,
    extract_feature_table,
    format_report,
)
from src.services.synth_service import synth_generate
from src.storage.bundle_manager import ModelBundle
from src.storage.manifest_store import load_manifest

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug detail")
    parser.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
    parser.add_argument("--workers", type=int, default=None, help="parallel workers (default from settings)")


def _add_cache(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--cache-dir", type=Path, default=None, help="reuse decomposed maps stored here (default from settings)"
    )


def _add_pipeline(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="seed for split, solver and classifier")
    parser.add_argument("--descriptor", choices=[kind.value for kind in DescriptorKind], default=None)
    parser.add_argument("--mode", choices=[mode.value for mode in PipelineMode], default=PipelineMode.PROPOSED.value)
    parser.add_argument("--svm-c", type=float, default=None, help="SVM regularisation C")
    parser.add_argument("--bsif-filters", type=Path, default=None, help="BSIF filter bank file to use instead of learning one")
    parser.add_argument("--train-subjects", type=int, default=None)
    parser.add_argument("--test-subjects", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finger-vein-pad",
        description="Finger-vein presentation attack detection by shape/material decomposition",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic bona fide/print-attack dataset")
    synth.add_argument("--out", type=Path, required=True, help="dataset directory")
    synth.add_argument("--subjects", type=int, default=None)
    synth.add_argument("--width", type=int, default=None)
    synth.add_argument("--height", type=int, default=None)
    synth.add_argument("--seed", type=int, default=None)
    _add_common(synth)

    decompose = commands.add_parser("decompose", help="decompose images and dump normal/albedo/shading/diffuse maps")
    decompose.add_argument("images", nargs="*", type=Path, help="PGM images")
    decompose.add_argument("--manifest", type=Path, default=None, help="decompose every image of a manifest")
    decompose.add_argument("--out", type=Path, required=True)
    decompose.add_argument("--seed", type=int, default=None)
    _add_common(decompose)

    extract = commands.add_parser("extract", help="write descriptor features of every manifest entry")
    extract.add_argument("--manifest", type=Path, required=True)
    extract.add_argument("--out", type=Path, required=True, help="feature table (CSV)")
    _add_pipeline(extract)
    _add_cache(extract)
    _add_common(extract)

    train = commands.add_parser("train", help="train the per-illumination classifiers into a model bundle")
    train.add_argument("--manifest", type=Path, required=True)
    train.add_argument("--out", type=Path, required=True, help="model bundle directory")
    _add_pipeline(train)
    _add_cache(train)
    _add_common(train)

    evaluate = commands.add_parser("eval", help="score the test split, fuse and report")
    evaluate.add_argument("--manifest", type=Path, required=True)
    evaluate.add_argument("--bundle", type=Path, required=True)
    evaluate.add_argument("--out", type=Path, required=True, help="directory for score files and reports")
    _add_cache(evaluate)
    _add_common(evaluate)

    det = commands.add_parser("det", help="DET tables and plot from score files")
    det.add_argument("scores", nargs="+", type=Path, help="score files (sample_id,label,score)")
    det.add_argument("--out", type=Path, required=True)
    _add_common(det)
    return parser


def pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    """Settings overridden by whichever pipeline flags were given."""
    base = settings.pipeline(PipelineMode(args.mode))
    data = base.model_dump()
    if args.descriptor is not None:
        data["descriptor"]["kind"] = args.descriptor
    if args.bsif_filters is not None:
        data["descriptor"]["kind"] = args.descriptor or DescriptorKind.BSIF.value
        data["descriptor"]["bsif_filter_path"] = args.bsif_filters
    if args.svm_c is not None:
        data["train"]["regularization_c"] = args.svm_c
    if args.train_subjects is not None:
        data["split"]["n_train_subjects"] = args.train_subjects
    if args.test_subjects is not None:
        data["split"]["n_test_subjects"] = args.test_subjects
    if args.seed is not None:
        for section in ("split", "train", "solver"):
            data[section]["seed"] = args.seed
    return PipelineConfig.model_validate(data)


def _workers(args: argparse.Namespace) -> int:
    workers = settings.runtime.workers if args.workers is None else args.workers
    if workers < 1:
        raise UsageError(f"--workers must be at least 1, got {workers}")
    return int(workers)


def _cache_dir(args: argparse.Namespace) -> Optional[Path]:
    return settings.runtime.cache_dir if args.cache_dir is None else args.cache_dir


def cmd_synth(args: argparse.Namespace) -> None:
    updates: Dict[str, object] = {}
    for flag, field in (("subjects", "n_subjects"), ("width", "width"), ("height", "height"), ("seed", "seed")):
        if getattr(args, flag) is not None:
            updates[field] = getattr(args, flag)
    config = SynthConfig.model_validate({**settings.synth.model_dump(), **updates})
    manifest = synth_generate(config, args.out, workers=_workers(args))
    counts = manifest.counts()
    print(
        f"{Fore.GREEN}Synthesised {counts['subjects']} subjects: {counts['entries']} images "
        f"({counts['bonafide']} bona fide, {counts['attack']} attack) in {args.out}{Style.RESET_ALL}"
    )


def cmd_decompose(args: argparse.Namespace) -> None:
    solver = settings.solver if args.seed is None else settings.solver.model_copy(update={"seed": args.seed})
    config = PipelineConfig(solver=solver)
    named = [(path.stem, path) for path in args.images]
    if args.manifest is not None:
        root = args.manifest.parent
        named += [(entry.image_id, root / entry.path) for entry in load_manifest(args.manifest).entries]
    images: Dict[str, Path] = {}
    for image_id, path in named:
        if image_id in images:
            raise UsageError(f"{path} and {images[image_id]} would both be written as {image_id}_*")
        images[image_id] = path
    if not images:
        raise UsageError("decompose needs image paths or --manifest")
    decompose_to_dumps(images, config, args.out)
    print(f"{Fore.GREEN}Decomposed {len(images)} images into {args.out}{Style.RESET_ALL}")


def cmd_extract(args: argparse.Namespace) -> None:
    config = pipeline_config(args)
    manifest = load_manifest(args.manifest)
    rows = extract_feature_table(
        manifest, args.manifest.parent, config, args.out, workers=_workers(args), cache_dir=_cache_dir(args)
    )
    print(f"{Fore.GREEN}Wrote {rows} feature rows to {args.out}{Style.RESET_ALL}")


def cmd_train(args: argparse.Namespace) -> None:
    config = pipeline_config(args)
    manifest = load_manifest(args.manifest)
    pipeline = PadPipeline(config, workers=_workers(args), cache_dir=_cache_dir(args))
    report = pipeline.train(manifest, args.manifest.parent, args.out)
    print(f"{Fore.GREEN}Trained {len(report.models)} classifiers ({config.mode.value}, "
          f"{config.descriptor.kind.value}) into {args.out}{Style.RESET_ALL}")
    for summary in report.models:
        print(
            f"  {Fore.CYAN}{summary.name:<12}{Style.RESET_ALL} "
            f"{summary.n_bona_fide} bona fide / {summary.n_attack} attack, "
            f"objective {summary.primal_objective:.4f}"
        )


def cmd_eval(args: argparse.Namespace) -> None:
    bundle = ModelBundle(args.bundle)
    config = bundle.load_config()
    manifest = load_manifest(args.manifest)
    pipeline = PadPipeline(config, workers=_workers(args), cache_dir=_cache_dir(args))
    report = pipeline.evaluate(bundle, manifest, args.manifest.parent, args.out)
    print(f"{Fore.GREEN}{Style.BRIGHT}Evaluation report{Style.RESET_ALL}")
    print(format_report(report), end="")


def cmd_det(args: argparse.Namespace) -> None:
    curves = export_det(args.scores, args.out)
    print(f"{Fore.GREEN}Wrote {len(curves)} DET tables and det.svg to {args.out}{Style.RESET_ALL}")


COMMANDS = {
    "synth": cmd_synth,
    "decompose": cmd_decompose,
    "extract": cmd_extract,
    "train": cmd_train,
    "eval": cmd_eval,
    "det": cmd_det,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns 0, 2 (usage), 3 (data) or 4 (compute)."""
    args = build_parser().parse_args(argv)
    level = "DEBUG" if args.verbose else "WARNING" if args.quiet else settings.runtime.log_level
    setup_logging(level)
    logger.info("running %s", args.command)
    try:
        COMMANDS[args.command](args)
    except PadError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("invalid configuration: %s", exc)
        return UsageError.exit_code
    except Exception:
        logger.exception("unexpected failure in %s", args.command)
        return 4
    logger.info("%s finished", args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
