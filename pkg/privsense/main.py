import argparse
import json
import logging
import sys
import traceback
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from . import __version__
from .config import settings
from .dispatcher import dispatch_task
from .errors import ConfigError, PrivsenseError


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as ConfigError instead of exiting with 2."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(
        prog="privsense",
        description="Isothermal FSG states for private distributed phase sensing.",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Overrides PRIVSENSE_LOG_LEVEL")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes for sweeps")

    common = CliParser(add_help=False, allow_abbrev=False)
    common.add_argument("--json", action="store_true", help="Print the result as JSON on stdout")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    state = sub.add_parser("state", parents=[common], help="Optimize one configuration", allow_abbrev=False)
    state.add_argument("--M", dest="M", type=int, required=True)
    state.add_argument("--nth", dest="n_th", type=float, required=True)
    state.add_argument("--N", dest="N_tot", type=float, required=True)
    state.add_argument("--objective", choices=["precision", "privacy"], default="privacy")
    state.add_argument("--qfim-form", dest="qfim_form", choices=["pure-state", "isothermal"], default=None)
    state.add_argument("--out", default=None)

    sweep = sub.add_parser("sweep", parents=[common], help="Run a sweep from a JSON config", allow_abbrev=False)
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", default=None)

    figures = sub.add_parser("figures", parents=[common], help="Write the figure sweeps", allow_abbrev=False)
    figures.add_argument("--which", type=int, nargs="+", choices=[2, 3, 4], default=[2, 3, 4])
    figures.add_argument("--outdir", default=None)

    mc = sub.add_parser("mc", parents=[common], help="Monte-Carlo check of the homodyne bound", allow_abbrev=False)
    mc.add_argument("--M", dest="M", type=int, required=True)
    mc.add_argument("--nth", dest="n_th", type=float, required=True)
    mc.add_argument("--N", dest="N_tot", type=float, required=True)
    mc.add_argument("--samples", type=int, required=True)
    mc.add_argument("--trials", type=int, required=True)
    mc.add_argument("--seed", type=int, required=True)
    mc.add_argument("--objective", choices=["precision", "privacy"], default="privacy")
    mc.add_argument("--out", default=None)

    return parser


def task_args(args: argparse.Namespace) -> Dict[str, Any]:
    if args.command == "state":
        keys = ["M", "n_th", "N_tot", "objective", "qfim_form", "out"]
    elif args.command == "sweep":
        keys = ["config", "out", "workers"]
    elif args.command == "figures":
        keys = ["which", "outdir", "workers"]
    else:
        keys = ["M", "n_th", "N_tot", "samples", "trials", "seed", "objective", "out"]
    return {key: getattr(args, key) for key in keys}


def _report(error: str, code: int) -> int:
    print(f"error: {error}", file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        return _report(str(e), e.exit_code)

    level = (args.log_level or settings.LOG_LEVEL).upper()
    if not isinstance(logging.getLevelName(level), int):
        return _report(f"unknown log level {level!r}", 1)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)

    try:
        result = dispatch_task(args.command, task_args(args))
    except PrivsenseError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return _report(str(e), e.exit_code)
    except ValidationError as ve:
        # Invalid user input that reached a model directly (e.g. --samples 1)
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in ve.errors())
        logging.error(f"Validation Error: {problems}")
        return _report(problems, 1)
    except json.JSONDecodeError as je:
        return _report(f"invalid JSON at line {je.lineno}, column {je.colno}: {je.msg}", 1)
    except OSError as oe:
        return _report(f"I/O failure: {oe}", 4)
    except Exception as e:
        logging.error(f"Internal Error: {e}")
        traceback.print_exc()
        return _report(f"Execution Error: {e}", 3)

    if args.command in ("state", "mc") or args.json:
        print(json.dumps(result, indent=2))
    else:
        print(result["message"])
    return 0
