"""Shared helper: run CLI invocations and write their output under ``--out``."""

import argparse
import pathlib
import sys

from qrbuffer.cli import run


class Recipe:
    def __init__(self, description: str) -> None:
        parser = argparse.ArgumentParser(description=description)
        parser.add_argument("--out", default="results", help="output directory (default: results)")
        parser.add_argument("--format", choices=("csv", "json"), default="csv")
        args = parser.parse_args()
        self.out = pathlib.Path(args.out)
        self.format = args.format
        self.out.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, *argv: str) -> None:
        target = self.out / f"{name}.{self.format}"
        code = run([*argv, "--format", self.format, "--output", str(target)])
        if code:
            sys.exit(code)
        print(f"wrote {target}")
