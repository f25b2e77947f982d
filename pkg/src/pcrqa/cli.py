"""Command-line entry point.

Exit codes: 0 success, 1 stage failure, 2 missing input file, 3 invalid
configuration.  Options override PCR_* environment variables, which
override the --config file, which overrides defaults.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .pipeline import MissingInputError, STAGE_ORDER, run_stage

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_MISSING_INPUT = 2
EXIT_BAD_CONFIG = 3


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps(
            {"level": record.levelname.lower(), "name": record.name,
             "message": record.getMessage()},
            sort_keys=True,
        )


def _setup_logging(json_logs: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.basicConfig(level=logging.INFO, handlers=[handler], force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcrqa",
        description="Review-request quality assurance pipeline: "
        "necessity prediction and tag recommendation.",
    )
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--json", action="store_true", help="machine-readable logs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_ORDER + ("all",):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run every stage")
        p.add_argument("--dump", help="posts XML dump (ingest input)")
        p.add_argument("--out", dest="out_dir", help="artifact directory")
        p.add_argument("--knowledge", dest="knowledge_file", help="knowledge base file")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--fold", type=int)
        p.add_argument("--split", choices=("train", "val", "test", "all"))
        p.add_argument("--backend", help="'builtin' or a fill-mask endpoint URL")
        p.add_argument("--epochs", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--embedding-dim", dest="embedding_dim", type=int)
        p.add_argument("--necessity-threshold", dest="necessity_threshold", type=int)
        p.add_argument("--rare-tag-theta", dest="rare_tag_theta", type=int)
        p.add_argument("--folds", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.json)
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "config", "json") and v is not None
    }
    try:
        cfg = load_config(args.config, overrides=overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    try:
        artifact = run_stage(args.command, cfg)
    except MissingInputError as exc:
        print(f"missing input: {exc.path}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except Exception as exc:  # noqa: BLE001 - stage boundary
        print(f"stage {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    if artifact is not None:
        print(artifact)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
