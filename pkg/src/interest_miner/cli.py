"""Operator command line: serve the API, render analyses, run simulations.

Subcommands: serve, heatmap, validate, simulate, export, import.  Every flag
falls back to INTEREST_MINER_* environment variables, then to built-in
defaults.  Exit codes: 0 success, 2 not found, 3 validation error, 4 I/O
error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

from .config import CliConfig
from .engine import OrderViolationError
from .pipeline import (
    RECOVERY_SCHEMA,
    figure_table_csv,
    render_overlays,
    to_json_bytes,
    validation_payload,
    write_heatmap_files,
)
from .simulator import SuiteParseError, generate, load_suite, recovery_score
from .storage import EventStore, ImageRegistry, StreamKey, StreamNotFoundError

EXIT_OK = 0
EXIT_NOT_FOUND = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interest-miner",
        description="Mine areas of interest in images from viewport event streams.",
    )
    parser.add_argument("--data-dir", help="event log root (INTEREST_MINER_DATA_DIR)")
    parser.add_argument("--output-dir", help="analysis output root (INTEREST_MINER_OUTPUT_DIR)")
    parser.add_argument("--scale", type=int, help="grid downsampling factor (INTEREST_MINER_SCALE)")
    parser.add_argument(
        "--threshold-mode",
        help="'mean' or 'fixed:<v>' mask cutoff (INTEREST_MINER_THRESHOLD_MODE)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the ingestion/analysis HTTP service")
    serve.add_argument("--port", type=int, help="listen port (INTEREST_MINER_PORT)")
    serve.add_argument("--host", help="bind address (INTEREST_MINER_HOST)")
    serve.add_argument("--no-fsync", action="store_true", help="batch log flushes")
    serve.add_argument(
        "--batch-cap", type=int, help="max events per POST batch (INTEREST_MINER_BATCH_CAP)"
    )
    serve.add_argument(
        "--cors-origins",
        help="comma-separated CORS allow-list (INTEREST_MINER_CORS_ORIGINS)",
    )

    heatmap = sub.add_parser("heatmap", help="render heat map files for an image")
    heatmap.add_argument("test_id")
    heatmap.add_argument("image_id")
    heatmap.add_argument("--user", help="single user instead of the aggregate")

    validate = sub.add_parser("validate", help="score mined masks against user marks")
    validate.add_argument("test_id")
    validate.add_argument("image_id", nargs="?", help="default: every image in the test")
    validate.add_argument("--sweep", help="comma-separated ascending thresholds to sweep")
    validate.add_argument(
        "--full-res",
        action="store_true",
        help="compare at image resolution instead of the analysis grid",
    )

    simulate = sub.add_parser("simulate", help="ingest a scripted suite and score recovery")
    simulate.add_argument("suite", help="suite JSON file")

    export = sub.add_parser("export", help="pack one test into a tar.gz archive")
    export.add_argument("test_id")
    export.add_argument("archive")

    imp = sub.add_parser("import", help="unpack an exported test archive")
    imp.add_argument("archive")

    return parser


def _config(args: argparse.Namespace) -> CliConfig:
    return CliConfig.resolve(
        data_dir=args.data_dir,
        output_dir=args.output_dir,
        scale=args.scale,
        threshold_mode=args.threshold_mode,
        port=getattr(args, "port", None),
        host=getattr(args, "host", None),
        batch_cap=getattr(args, "batch_cap", None),
        cors_origins=getattr(args, "cors_origins", None),
        fsync=False if getattr(args, "no_fsync", False) else None,
    )


def cmd_serve(args, config: CliConfig) -> int:
    import uvicorn

    from .api import create_app

    config.data_dir.mkdir(parents=True, exist_ok=True)
    probe = config.data_dir / ".writable"
    try:
        probe.touch()
        probe.unlink()
    except OSError as exc:
        print(f"data dir not writable: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")
    except SystemExit as exc:  # uvicorn signals startup failure this way
        return EXIT_IO if exc.code else EXIT_OK
    except OSError as exc:
        print(f"cannot serve on {config.host}:{config.port}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_heatmap(args, config: CliConfig) -> int:
    store = EventStore(config.data_dir, fsync=config.fsync)
    registry = ImageRegistry(config.data_dir)
    out_dir = config.output_dir / args.test_id / args.image_id
    try:
        written = write_heatmap_files(
            store,
            registry,
            args.test_id,
            args.image_id,
            scale=config.scale,
            out_dir=out_dir,
            user_id=args.user,
            threshold=config.threshold,
        )
    finally:
        store.close()
    for path in written.values():
        print(path)
    return EXIT_OK


def cmd_validate(args, config: CliConfig) -> int:
    store = EventStore(config.data_dir, fsync=config.fsync)
    registry = ImageRegistry(config.data_dir)
    sweep = [float(v) for v in args.sweep.split(",")] if args.sweep else None
    try:
        images = [args.image_id] if args.image_id else store.list_images(args.test_id)
        if not images:
            raise StreamNotFoundError(f"no data for test {args.test_id!r}")
        reports = []
        for image_id in images:
            payload = validation_payload(
                store,
                registry,
                args.test_id,
                image_id,
                scale=config.scale,
                threshold=config.threshold,
                sweep=sweep,
                full_res=args.full_res,
            )
            out_dir = config.output_dir / args.test_id / image_id
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "validation.json").write_bytes(to_json_bytes(payload))
            render_overlays(
                store,
                registry,
                args.test_id,
                image_id,
                scale=config.scale,
                out_root=config.output_dir,
                threshold=config.threshold,
            )
            reports.append(payload)
            print(
                f"{image_id}: users={len(payload['per_user'])} "
                f"min={payload['per_image']['min']:.3f} "
                f"avg={payload['per_image']['avg']:.3f} "
                f"max={payload['per_image']['max']:.3f}"
            )
        table = config.output_dir / args.test_id / "jaccard_by_image.csv"
        table.write_text(figure_table_csv(reports))
        print(table)
    finally:
        store.close()
    return EXIT_OK


def cmd_simulate(args, config: CliConfig) -> int:
    suite = load_suite(args.suite)
    store = EventStore(config.data_dir, fsync=config.fsync)
    registry = ImageRegistry(config.data_dir)
    results = []
    try:
        for entry in suite.entries:
            meta = entry.script.image
            registry.register(meta.image_id, meta.width, meta.height)
            key = StreamKey(suite.test_id, meta.image_id, entry.user_id)
            store.append_batch(key, generate(entry.script))
            if entry.script.planted_rois:
                report = recovery_score(
                    entry.script, scale=config.scale, threshold=config.threshold
                )
                results.append(
                    {"user_id": entry.user_id, "image_id": meta.image_id, **asdict(report)}
                )
                flag = " (degenerate)" if report.degenerate else ""
                print(f"{entry.user_id}/{meta.image_id}: recovery={report.jaccard:.3f}{flag}")
            else:
                print(f"{entry.user_id}/{meta.image_id}: ingested (no planted regions)")
        out_dir = config.output_dir / suite.test_id
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path = out_dir / "recovery.json"
        report_path.write_bytes(to_json_bytes({"schema": RECOVERY_SCHEMA, "results": results}))
        print(report_path)
    finally:
        store.close()
    return EXIT_OK


def cmd_export(args, config: CliConfig) -> int:
    store = EventStore(config.data_dir, fsync=config.fsync)
    try:
        archive = store.export_test(
            args.test_id, args.archive, ImageRegistry(config.data_dir)
        )
    finally:
        store.close()
    print(archive)
    return EXIT_OK


def cmd_import(args, config: CliConfig) -> int:
    if not Path(args.archive).is_file():
        print(f"archive not found: {args.archive}", file=sys.stderr)
        return EXIT_NOT_FOUND
    store = EventStore(config.data_dir, fsync=config.fsync)
    try:
        store.import_test(args.archive, ImageRegistry(config.data_dir))
    finally:
        store.close()
    return EXIT_OK


COMMANDS = {
    "serve": cmd_serve,
    "heatmap": cmd_heatmap,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "export": cmd_export,
    "import": cmd_import,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
    except ValueError as exc:
        print(f"bad configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return COMMANDS[args.command](args, config)
    except StreamNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NOT_FOUND
    except (SuiteParseError, OrderViolationError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
