"""Command-line surface: one subcommand per pipeline stage.

Exit codes: 0 success, 1 operational errors (one-line diagnostic on
stderr), 2 usage errors. All randomness flows from explicit --seed flags;
keygen without a seed draws system entropy.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from PIL import UnidentifiedImageError

from . import codebook as cb_mod
from . import crypto, evaluate, service
from .errors import EtcCbirError
from .esimple import esimple
from .index import IndexEntry, RetrievalIndex
from .raster import crop_to_block_multiple, load_image, save_image

CONFIG_ENV = "ETC_CBIR_CONFIG"


def _seed_type(text: str) -> int:
    return int(text, 0)


def cmd_keygen(args) -> int:
    keys = crypto.keygen(args.seed)
    crypto.save_keyset(keys, args.output)
    return 0


def cmd_encrypt(args) -> int:
    keys = crypto.load_keyset(args.key)
    img = crop_to_block_multiple(load_image(args.input))
    save_image(crypto.encrypt(img, keys), args.output)
    return 0


def cmd_decrypt(args) -> int:
    keys = crypto.load_keyset(args.key)
    save_image(crypto.decrypt(load_image(args.input), keys), args.output)
    return 0


def cmd_codebook_build(args) -> int:
    paths = evaluate.list_images(args.images)
    images = [load_image(p) for p in paths]
    label = args.label if args.label is not None else Path(args.images).name
    book = cb_mod.build_codebook(
        images, m=args.words, seed=args.seed, label=label,
        max_iters=args.max_iters, tol=args.tol,
    )
    book.save(args.output)
    print(f"codebook M={book.m} from {len(images)} images -> {args.output} "
          f"(id {book.file_hash()})")
    return 0


def cmd_index_build(args) -> int:
    book = cb_mod.Codebook.load(args.codebook)
    index = RetrievalIndex.for_codebook(book)
    for path in evaluate.list_images(args.images):
        img = crop_to_block_multiple(load_image(path))
        index.add(IndexEntry(
            image_id=path.stem,
            vector=esimple(img, book),
            owner_info=args.owner,
            stored_path=str(path),
        ))
    index.save(args.output)
    print(f"indexed {len(index)} images -> {args.output}")
    return 0


def cmd_query(args) -> int:
    book = cb_mod.Codebook.load(args.codebook)
    index = RetrievalIndex.load(args.index)
    img = crop_to_block_multiple(load_image(args.image))
    for r in index.query(esimple(img, book), k=args.top):
        print(f"{r.rank}\t{r.image_id}\t{r.distance!r}")
    return 0


def cmd_eval_map(args) -> int:
    manifest = evaluate.EvalManifest.load(args.manifest)
    keys = evaluate.owner_keys(manifest, args.seed) if args.encrypt else None
    report = evaluate.run_experiment(
        manifest, args.codebook_images, m=args.words, seed=args.seed, encrypt_keys=keys,
    )
    if args.output:
        Path(args.output).write_text(report.to_json() + "\n")
        print(f"mAP={report.map:.6f} ({len(report.per_query)} queries) -> {args.output}")
    else:
        print(report.to_json())
    return 0


def cmd_serve(args) -> int:
    defaults = {}
    config_path = os.environ.get(CONFIG_ENV)
    if config_path:
        defaults = service.load_config_file(config_path)
    cfg = service.ServiceConfig(
        codebook_path=args.codebook or defaults.get("codebook", ""),
        index_path=args.index or defaults.get("index", "index.txt"),
        storage_dir=args.storage or defaults.get("storage", "storage"),
        listen=args.listen or defaults.get("listen", "127.0.0.1:8000"),
        top_k=args.top_k if args.top_k is not None else int(defaults.get("top_k", 10)),
    )
    if not cfg.codebook_path:
        print("etc-cbir: serve needs --codebook (or a config file)", file=sys.stderr)
        return 2
    service.serve(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etc-cbir",
                                     description="Privacy-preserving CBIR over EtC images")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a key set file")
    p.add_argument("--seed", type=_seed_type, default=None,
                   help="64-bit seed; system entropy when omitted")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt", help="encrypt an image (crops to 16-pixel multiples)")
    p.add_argument("input")
    p.add_argument("-k", "--key", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt an EtC image")
    p.add_argument("input")
    p.add_argument("-k", "--key", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("codebook", help="codebook operations")
    csub = p.add_subparsers(dest="subcommand", required=True)
    pb = csub.add_parser("build", help="train a codebook from a plain-image directory")
    pb.add_argument("--images", required=True, help="training image directory")
    pb.add_argument("-M", "--words", type=int, default=256, help="codebook size (256 or 512 typical)")
    pb.add_argument("--seed", type=_seed_type, default=0)
    pb.add_argument("--label", default=None, help="dataset label stored in metadata")
    pb.add_argument("--max-iters", type=int, default=100)
    pb.add_argument("--tol", type=float, default=1e-6)
    pb.add_argument("-o", "--output", required=True)
    pb.set_defaults(func=cmd_codebook_build)

    p = sub.add_parser("index", help="index operations")
    isub = p.add_subparsers(dest="subcommand", required=True)
    ib = isub.add_parser("build", help="index a directory of (encrypted) images")
    ib.add_argument("--codebook", required=True)
    ib.add_argument("--images", required=True)
    ib.add_argument("--owner", default="", help="owner_info recorded for every entry")
    ib.add_argument("-o", "--output", required=True)
    ib.set_defaults(func=cmd_index_build)

    p = sub.add_parser("query", help="rank an index against a query image")
    p.add_argument("image")
    p.add_argument("--codebook", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="evaluation runs")
    esub = p.add_subparsers(dest="subcommand", required=True)
    em = esub.add_parser("map", help="mAP of a manifest corpus")
    em.add_argument("--manifest", required=True, help="CSV of path,group_id rows")
    em.add_argument("--codebook-images", required=True, help="independent training directory")
    em.add_argument("-M", "--words", type=int, default=256)
    em.add_argument("--seed", type=_seed_type, default=0)
    em.add_argument("--encrypt", action="store_true",
                    help="store encrypted copies and query with independent user keys")
    em.add_argument("-o", "--output", default=None, help="write the JSON report here")
    em.set_defaults(func=cmd_eval_map)

    p = sub.add_parser("serve", help="run the third-party HTTP service")
    p.add_argument("--codebook", default=None)
    p.add_argument("--index", default=None)
    p.add_argument("--storage", default=None)
    p.add_argument("--listen", default=None, help="host:port (default 127.0.0.1:8000)")
    p.add_argument("--top-k", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (EtcCbirError, OSError, UnidentifiedImageError, ValueError) as exc:
        print(f"etc-cbir: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
