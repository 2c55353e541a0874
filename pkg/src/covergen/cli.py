"""Command line entry points: train, generate, serve.

Exit codes are a stable contract: 0 success, 2 validation (bad config,
graph, or request options), 3 I/O (missing files, unreadable datasets),
4 numeric abort (non-finite loss).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, profile, save_config
from .data import DataError, load_training_set
from .graphs import GraphError
from .pipeline import GenerationPipeline, RequestError, encode_png
from .synthetic import make_scene_dataset
from .training import NonFiniteLossError, Trainer

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covergen", description="Layout-graph book cover generation")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run the adversarial training loop")
    train.add_argument("--config", help="JSON config file")
    train.add_argument("--profile", help="named preset: full, overfit10, smoke500")
    train.add_argument("--scenes", help="scene dataset root (annotations.json + images/)")
    train.add_argument("--covers", help="book cover image directory")
    train.add_argument("--out", default="runs/default", help="output directory for checkpoints and logs")
    train.add_argument("--steps", type=int, help="override the configured step count")
    train.add_argument("--seed", type=int, help="override the configured seed")
    train.add_argument("--resume", help="checkpoint directory to resume from")

    gen = sub.add_parser("generate", help="render covers from a layout graph file")
    gen.add_argument("graph", help="layout graph JSON file")
    gen.add_argument("--checkpoint", required=True, help="checkpoint directory")
    gen.add_argument("--out", default="cover.png", help="output PNG path (or directory for variations)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--variations", type=int, default=1)
    gen.add_argument("--title-text", help="replace the title with this text")
    gen.add_argument("--title-backend", default="fallback", choices=["fallback", "external"])

    serve = sub.add_parser("serve", help="run the HTTP inference service")
    serve.add_argument("--checkpoint", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--title-backend", default="fallback", choices=["fallback", "external"])

    return parser


def _resolve_config(args):
    if args.config and args.profile:
        raise ConfigError("pass either --config or --profile, not both")
    if args.config:
        config = load_config(args.config)
    else:
        config = profile(args.profile or "overfit10")
    if args.steps is not None:
        config.train.steps = args.steps
    if args.seed is not None:
        config.train.seed = args.seed
    return config


def cmd_train(args) -> int:
    config = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    scenes, covers = args.scenes, args.covers
    if scenes is None:
        # Self-contained runs draw on the synthetic corpus.
        n = config.data.limit or 10
        scenes = make_scene_dataset(
            out / "synthetic" / "scenes", n, config.train.seed, config.model.canvas
        )
        log.info("no --scenes given; wrote synthetic scenes to %s", scenes)
    if covers is None:
        # The annotated images double as the cover corpus.  The reconstruction
        # target and the realism reference must come from the same image
        # family, otherwise the book adversary pulls the generator away from
        # the very images the pixel loss asks it to reproduce.
        covers = Path(scenes) / "images"
        log.info("no --covers given; using the scene images as the cover corpus")

    samples, cover_list, vocab = load_training_set(scenes, covers, config)
    if args.resume:
        trainer = Trainer.load(args.resume)
        remaining = config.train.steps - trainer.step_index
        if remaining <= 0:
            log.info("checkpoint already at step %d; nothing to do", trainer.step_index)
            return EXIT_OK
        steps = remaining
    else:
        trainer = Trainer(config, vocab)
        steps = config.train.steps
        save_config(config, out / "config.json")

    trainer.fit(
        samples,
        cover_list,
        steps=steps,
        csv_path=out / "losses.csv",
        checkpoint_dir=out / "checkpoint",
    )
    trainer.save_checkpoint(out / "checkpoint", samples)
    print(f"trained to step {trainer.step_index}; checkpoint at {out / 'checkpoint'}")
    return EXIT_OK


def cmd_generate(args) -> int:
    pipeline = GenerationPipeline.from_checkpoint(args.checkpoint, args.title_backend)
    graph_text = Path(args.graph).read_text()
    result = pipeline.generate(
        graph_text, seed=args.seed, variations=args.variations, title_text=args.title_text
    )
    out = Path(args.out)
    if args.variations == 1 and out.suffix == ".png":
        paths = [out]
    else:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"cover_{i:02d}.png" for i in range(args.variations)]
    for path, image in zip(paths, result.images):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_png(image))
    summary = {
        "files": [str(p) for p in paths],
        "boxes": {k: list(v) for k, v in result.boxes.items()},
        "seconds": result.seconds,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint=args.checkpoint, title_backend=args.title_backend)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handlers = {"train": cmd_train, "generate": cmd_generate, "serve": cmd_serve}
    try:
        return handlers[args.command](args)
    except (ConfigError, GraphError, RequestError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DataError, FileNotFoundError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NonFiniteLossError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
