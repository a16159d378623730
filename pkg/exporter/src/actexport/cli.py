"""Command line front end: actexport export --model ... --image ..."""

import argparse
import sys
from pathlib import Path

from actexport.export import MODEL_IDS, ExportError, export

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="actexport",
        description="Export CNN activation stacks plus a layer manifest.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="hook a model and dump activations")
    p.add_argument("--model", required=True, choices=MODEL_IDS)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--layers", default=None,
                   help="'all' for every leaf module, or a comma-separated "
                        "list of module names; default: top-level blocks")
    p.add_argument("--out", type=Path, required=True)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    layers = args.layers
    if layers is not None and layers != "all":
        layers = [s.strip() for s in layers.split(",") if s.strip()]
    try:
        manifest = export(args.model, args.image, args.weights, args.out,
                          layers=layers)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {len(manifest['layers'])}-layer manifest to "
          f"{args.out / 'manifest.json'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
