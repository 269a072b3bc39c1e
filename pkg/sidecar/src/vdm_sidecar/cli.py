"""CLI: serve score-distillation guidance over the wire protocol."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .guidance import GRAD_MODES, GuidanceSession
from .model import ModelLoadError, load_model
from .prompts import PromptSpec


def main(argv=None):
    ap = argparse.ArgumentParser(prog="sidecar", description=__doc__)
    ap.add_argument("--mode", choices=sorted(GRAD_MODES), default="se_sds")
    ap.add_argument("--prompt-file", required=True,
                    help="JSON file with tokens/weights/negative_prompt/cfg_scale")
    ap.add_argument("--endpoint", default="127.0.0.1:7431",
                    help="host:port to listen on")
    ap.add_argument("--stub", action="store_true",
                    help="use the deterministic stub model (no weights needed)")
    ap.add_argument("--model", default=None, help="pretrained model name")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-requests", type=int, default=None,
                    help="exit after this many requests (for scripted runs)")
    args = ap.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(message)s")
    with open(args.prompt_file) as fh:
        prompt = PromptSpec.from_dict(json.load(fh))
    try:
        model = load_model(args.model, stub=args.stub, seed=args.seed)
    except ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    from .server import serve_guidance
    session = GuidanceSession(args.mode, prompt, model, seed=args.seed)
    serve_guidance(args.endpoint, session, max_requests=args.max_requests)
    return 0


if __name__ == "__main__":
    sys.exit(main())
