"""Command-line entry point: convert a saved Keras model to container files.

Exit codes: 0 success, 2 usage, load, or conversion errors.
"""

import argparse
import sys

from .export import ExportError, export_to_files


def build_parser():
    p = argparse.ArgumentParser(
        prog="nnjit-export",
        description="Export a Keras model (.keras/.h5) to an nnjit manifest "
                    "and weight blob")
    p.add_argument("model", help="saved Keras model file")
    p.add_argument("manifest", help="output manifest path (JSON)")
    p.add_argument("--weights", default=None,
                   help="output blob path (default: manifest with .bin)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        import keras
        model = keras.saving.load_model(args.model, compile=False)
        mpath, bpath = export_to_files(model, args.manifest, args.weights)
    except (ExportError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {mpath} and {bpath}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
