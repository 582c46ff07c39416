"""Render figures for one run directory.

    chemoplots RUN_DIR [--spec FIGSPEC.json] [--out-dir DIR] [--times ...]

The optional JSON figure-spec file may set "times" (list) and
"out_dir"; command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .figures import FigureSpec, MalformedCsv, MissingSnapshot, render_run


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="chemoplots",
                                     description="Render run-directory figures")
    parser.add_argument("run_dir")
    parser.add_argument("--spec", help="JSON figure-spec file")
    parser.add_argument("--out-dir")
    parser.add_argument("--times", type=float, nargs="+")
    args = parser.parse_args(argv)

    kwargs: dict = {}
    if args.spec:
        kwargs.update(json.loads(Path(args.spec).read_text()))
    if args.times:
        kwargs["times"] = tuple(args.times)
    elif "times" in kwargs and kwargs["times"] is not None:
        kwargs["times"] = tuple(kwargs["times"])
    if args.out_dir:
        kwargs["out_dir"] = args.out_dir

    try:
        result = render_run(FigureSpec(run_dir=args.run_dir, **kwargs))
    except (MissingSnapshot, MalformedCsv, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for image in result.images:
        print(image)
    print(result.metadata_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
