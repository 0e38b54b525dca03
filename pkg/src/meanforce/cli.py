"""``meanforce`` command line.

Exit codes: 0 success, 2 configuration error, 3 contract violation,
4 oracle deviation. Failures print one ``key=value`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import EXPERIMENTS, parse_config
from .errors import ConfigError, MeanForceError
from .runner import RunResult, run

log = logging.getLogger("meanforce")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="meanforce", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="configuration file")
    src.add_argument("--sweep", type=Path, metavar="DIR", help="run every *.cfg in DIR concurrently")
    p.add_argument("--out", type=Path, help="output path (a directory with --sweep)")
    p.add_argument("--cross-check", action="store_true", help="compare against an independent propagation route")
    p.add_argument("--workers", type=int, default=None, help="sweep worker threads")
    p.add_argument("-q", "--quiet", action="store_true", help="log warnings only")
    return p


def reason_line(code: int, reason: str, detail: str, config: Path | None = None) -> str:
    detail = " ".join(str(detail).split())
    where = f" config={config}" if config is not None else ""
    return f"meanforce: exit={code} reason={reason}{where} detail={detail}"


def _run_one(experiment: str, path: Path, out: Path | None, cross_check: bool) -> tuple[int, str | None]:
    """Run one config file; returns (exit code, stderr line or None)."""
    try:
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = parse_config(text, experiment)
        result = run(cfg, cross_check=cross_check)
        if out is None and cfg["out"]:
            out = (path.parent / cfg["out"]) if not Path(cfg["out"]).is_absolute() else Path(cfg["out"])
        _emit(result, out)
    except MeanForceError as exc:
        return exc.exit_code, reason_line(exc.exit_code, exc.reason, exc, path)
    if result.failures:
        f = result.failures[0]
        return f.exit_code, reason_line(f.exit_code, f.reason, f.detail, path)
    return 0, None


def _emit(result: RunResult, out: Path | None) -> None:
    body = result.text if not result.columns else result.to_csv()
    if out is None:
        sys.stdout.write(body)
        sys.stdout.flush()
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(body, encoding="utf-8")
    log.info("wrote %s", out)


def _sweep(args) -> int:
    if not args.sweep.is_dir():
        print(reason_line(2, "config_error", f"sweep directory {args.sweep} not found"), file=sys.stderr)
        return 2
    configs = sorted(args.sweep.glob("*.cfg"))
    if not configs:
        print(reason_line(2, "config_error", f"no *.cfg files in {args.sweep}"), file=sys.stderr)
        return 2
    out_dir = args.out or args.sweep
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        outcomes = list(pool.map(
            lambda p: _run_one(args.experiment, p, out_dir / f"{p.stem}.csv", args.cross_check), configs
        ))
    for code, line in outcomes:
        if line:
            print(line, file=sys.stderr)
    return max(code for code, _ in outcomes)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.sweep is not None:
        return _sweep(args)
    code, line = _run_one(args.experiment, args.config, args.out, args.cross_check)
    if line:
        print(line, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
