"""Shared helpers for the experiment scripts."""
import sys
from pathlib import Path

from physest.harness import cli


def run(*args) -> None:
    argv = [str(a) for a in args]
    print("physest", " ".join(argv), flush=True)
    code = cli.main(argv)
    if code:
        sys.exit(code)


def out_dir(default: str) -> Path:
    return Path(sys.argv[1] if len(sys.argv) > 1 else default)
