"""Executables behind the ``mkfile`` and ``ccount`` kernels.

Run as ``python -m ensemblekit.tools mkfile --size N --seed S --output F``
or ``python -m ensemblekit.tools ccount --input F``.
"""

from __future__ import annotations

import argparse
import random
import string
import sys

ALPHABET = string.ascii_letters + string.digits


def make_file(path: str, size: int, seed: int = 0) -> None:
    rng = random.Random(seed)
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("".join(rng.choices(ALPHABET, k=size)))


def count_chars(path: str) -> int:
    with open(path, encoding="ascii", newline="") as fh:
        return len(fh.read())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ensemblekit.tools")
    sub = parser.add_subparsers(dest="tool", required=True)
    mk = sub.add_parser("mkfile", help="write SIZE random characters")
    mk.add_argument("--size", type=int, required=True)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--output", default="data.txt")
    cc = sub.add_parser("ccount", help="print the character count of a file")
    cc.add_argument("--input", required=True)
    args = parser.parse_args(argv)

    if args.tool == "mkfile":
        make_file(args.output, args.size, args.seed)
    else:
        print(count_chars(args.input))
    return 0


if __name__ == "__main__":
    sys.exit(main())
