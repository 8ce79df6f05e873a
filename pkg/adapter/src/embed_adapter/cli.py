"""embed-adapter command line: export-docs, export-words, serve."""
from __future__ import annotations

import argparse
import logging
import sys

from .export import export_doc_embeddings, export_word_embeddings
from .models import ModelLoadError
from .server import DEFAULT_MAX_BATCH, serve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-adapter",
        description="Export document/word vectors in the interchange format "
                    "or serve them over the /embed HTTP contract.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    docs = sub.add_parser("export-docs", help="one vector per corpus record")
    docs.add_argument("--model", required=True, help="builtin:hash[:dim] | st:<name> | wordvec:<path>")
    docs.add_argument("--input", required=True, help="canonical corpus CSV")
    docs.add_argument("--output", required=True, help="embedding file to write")
    docs.add_argument("--batch-size", type=int, default=64)

    words = sub.add_parser("export-words", help="one vector per vocabulary token")
    words.add_argument("--model", required=True)
    words.add_argument("--vocab", required=True, help="token list, one per line")
    words.add_argument("--output", required=True)
    words.add_argument("--oov-sidecar", help="file listing tokens without vectors")

    srv = sub.add_parser("serve", help="run the /embed HTTP service")
    srv.add_argument("--model", required=True)
    srv.add_argument("--port", type=int, default=8641)
    srv.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "export-docs":
            n = export_doc_embeddings(args.model, args.input, args.output, args.batch_size)
            print(f"wrote {n} document vectors to {args.output}")
        elif args.command == "export-words":
            n, oov = export_word_embeddings(args.model, args.vocab, args.output, args.oov_sidecar)
            print(f"wrote {n} word vectors to {args.output} ({oov} out of vocabulary)")
        else:
            serve(args.model, args.port, args.max_batch)
    except ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
