"""`alforge-embed`: run one extraction from a JSON spec file.

The JSON keys mirror ExtractionSpec fields.  Verify the output with
`alforge validate <dir>`.
"""

import argparse
import json
import sys
from pathlib import Path

from .extract import ExtractionError, ExtractionSpec, extract


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="alforge-embed",
        description="Extract frozen embeddings into an alforge dataset directory.",
    )
    parser.add_argument("--config", required=True, help="JSON ExtractionSpec")
    args = parser.parse_args(argv)

    config_path = Path(args.config)
    if not config_path.is_file():
        print(f"error: config file not found: {config_path}", file=sys.stderr)
        return 2
    try:
        spec = ExtractionSpec(**json.loads(config_path.read_text(encoding="utf-8")))
        out = extract(spec)
    except (ExtractionError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
