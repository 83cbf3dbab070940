"""Stand-alone backend speaking the NDJSON protocol, for tests and local runs.

    python -m skgkit.mock_backend --penman "(z0 / dog)" --text "A dog."
    python -m skgkit.mock_backend --index index.jsonl --tcp 8765

Without fixed replies it serves retrieval imagination (``--index``) and the
template verbalizer.  ``--delay``, ``--raw`` and ``--error`` produce slow,
garbled and failing replies.
"""

from __future__ import annotations

import argparse
import sys
import time

from .backend import make_handler, serve_stream, serve_tcp
from .imagination import ConceptIndex, RetrievalImaginer
from .verbalization import TemplateVerbalizer


def build_handler(args):
    imaginer = RetrievalImaginer(ConceptIndex.load(args.index)) if args.index else None
    fallback = make_handler(imaginer, TemplateVerbalizer())

    def handle(req: dict) -> dict:
        if args.delay:
            time.sleep(args.delay)
        if args.error is not None:
            return {"error": args.error}
        if req.get("kind") == "imagine" and args.penman is not None:
            return {"penman": args.penman}
        if req.get("kind") == "verbalize" and args.text is not None:
            return {"text": args.text}
        return fallback(req)

    return handle


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m skgkit.mock_backend", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--penman", help="fixed PENMAN reply to imagine requests")
    parser.add_argument("--text", help="fixed sentence reply to verbalize requests")
    parser.add_argument("--index", help="corpus index for retrieval imagination")
    parser.add_argument("--delay", type=float, default=0.0, help="seconds to wait before each reply")
    parser.add_argument("--error", help="answer every request with this error message")
    parser.add_argument("--raw", help="answer every request with this literal line")
    parser.add_argument("--tcp", type=int, metavar="PORT", help="listen on 127.0.0.1:PORT instead of stdio")
    args = parser.parse_args(argv)

    handler = build_handler(args)
    if args.tcp is not None:
        server = serve_tcp(handler, port=args.tcp)
        print(f"listening on {server.server_address[0]}:{server.server_address[1]}", file=sys.stderr, flush=True)
        try:
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            server.shutdown()
        return 0
    if args.raw is not None:
        for line in sys.stdin:
            if args.delay:
                time.sleep(args.delay)
            sys.stdout.write(args.raw + "\n")
            sys.stdout.flush()
        return 0
    serve_stream(handler, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
