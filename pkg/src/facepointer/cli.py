"""Command-line entry points: run, serve, gen-fixtures."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .config import PipelineConfig, load_config, save_config
from .events import EventLogWriter
from .pipeline import run_pipeline
from .ssr import save_template


def _load_cfg(path: str | None) -> PipelineConfig:
    return load_config(path) if path else PipelineConfig()


def cmd_run(args) -> int:
    cfg = _load_cfg(args.config)
    sinks = []
    log_fh = None
    if args.log:
        log_fh = open(args.log, "w")
        writer = EventLogWriter(log_fh)
        sinks.append(writer.write)
    if args.print_events:
        from .events import to_json_line

        sinks.append(lambda record: print(to_json_line(record)))
    clock = time.perf_counter if args.wall_clock else None
    try:
        summary = run_pipeline(args.frames, cfg, sinks=sinks, clock=clock, overlay_dir=args.overlay)
    finally:
        if log_fh:
            log_fh.close()
    print(
        f"processed {summary.frames} frames ({summary.skipped} skipped), "
        f"{summary.events} events, {summary.elapsed_s:.2f}s wall, "
        f"{summary.wall_fps:.1f} fps"
    )
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    cfg = _load_cfg(args.config)
    static = args.static
    if static is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        static = bundled if bundled.is_dir() else None
    serve(args.bind, cfg, static)
    return 0


def cmd_gen_fixtures(args) -> int:
    from .fixtures import default_bte_template, write_detection_fixtures, write_session_fixture

    out = Path(args.out)
    manifest = write_detection_fixtures(out / "detection", args.seed)
    session = write_session_fixture(out / "session")
    save_template(default_bte_template(), out / "template.ssrt")
    save_config(PipelineConfig(), out / "config.json")
    print(
        f"wrote {len(manifest['renders'])} detection renders and a "
        f"{session['length']}-frame session under {out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facepointer", description="Face-driven virtual pointer engine")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="process a recorded frame directory")
    run.add_argument("--frames", required=True, help="directory of PGM/PNG frames")
    run.add_argument("--config", help="pipeline config JSON")
    run.add_argument("--overlay", help="write annotated PNGs into this directory")
    run.add_argument("--log", help="write the JSON Lines event log here")
    run.add_argument("--print-events", action="store_true", help="echo events to stdout")
    run.add_argument("--wall-clock", action="store_true",
                     help="use the wall clock for fps metrics (log is no longer reproducible)")
    run.set_defaults(func=cmd_run)

    srv = sub.add_parser("serve", help="run the live WebSocket session service")
    srv.add_argument("--bind", default="127.0.0.1:8799", help="host:port to listen on")
    srv.add_argument("--config", help="pipeline config JSON")
    srv.add_argument("--static", help="serve this directory over HTTP (front-end assets)")
    srv.set_defaults(func=cmd_serve)

    gen = sub.add_parser("gen-fixtures", help="write synthetic faces, a session, template and config")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=7)
    gen.set_defaults(func=cmd_gen_fixtures)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
