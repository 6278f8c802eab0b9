"""Exporter command line.

* ``pretrain-vae`` -- train the small VAE on Omniglot (or the synthetic
  glyph source) and save the frozen encoder.
* ``export``       -- encode an image dataset through a saved VAE
  encoder or a ResNet-50 checkpoint and write an EMC1 file.

Exit codes: 0 success, 2 usage/config error, 3 missing data, 1 export
failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .datasets import DataUnavailable, load_cifar, load_mnist, load_omniglot, synthetic_glyphs
from .emc_format import ExportError
from .export import export_dataset, load_encoder, save_encoder
from .vae import LATENT, VaeSpec, encode_images, pretrain_vae


def cmd_pretrain_vae(args) -> int:
    spec = VaeSpec(
        beta=args.beta,
        batches=args.batches,
        batch_size=args.batch_size,
        lr=args.lr,
        recon_threshold=args.threshold,
        max_retrains=args.max_retrains,
    )
    if args.synthetic:
        images, _ = synthetic_glyphs(m=20, per_class=args.synthetic, seed=args.seed)
    else:
        if not args.data_root:
            raise ExportError("--data-root is required unless --synthetic is used")
        images = load_omniglot(args.data_root)
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(images.shape[0])
    holdout = max(1, images.shape[0] // 20)
    train, held = images[order[holdout:]], images[order[:holdout]]
    print(f"pretraining on {train.shape[0]} images ({holdout} held out)")
    encoder, recon = pretrain_vae(train, held, spec, args.seed,
                                  log_every=args.log_every)
    fp = save_encoder(encoder, args.out, spec_info=spec.describe())
    print(f"held-out reconstruction {recon:.4f} <= {spec.recon_threshold}")
    print(f"saved {args.out} (weights {fp[:16]})")
    return 0


def _mnist_splits(args):
    if args.dataset == "synthetic":
        images, labels = synthetic_glyphs(m=10, per_class=args.synthetic_per_class,
                                          seed=args.seed)
        # per-class 80/20 split so both splits cover every class
        train_mask = np.zeros(labels.size, bool)
        for c in range(10):
            idx = np.flatnonzero(labels == c)
            train_mask[idx[: (8 * idx.size) // 10]] = True
        return (
            (images[train_mask], labels[train_mask]),
            (images[~train_mask], labels[~train_mask]),
        )
    return load_mnist(args.data_root)


def cmd_export(args) -> int:
    if args.kind == "vae":
        encoder, fp, spec_info = load_encoder(args.encoder)
        train, test = _mnist_splits(args)
        meta = {"encoder": "vae-means-head", "encoder_weights": fp,
                "encoder_spec": spec_info, "dataset": args.dataset,
                "seed": args.seed}
        path = export_dataset(
            lambda imgs: encode_images(encoder, imgs),
            LATENT, train, test, args.out,
            source=f"vae-{args.dataset}", meta=meta,
        )
    else:
        from .backbone import FEATURE_DIM, encode_cifar_images, load_backbone

        classes = 10 if args.dataset == "cifar10" else 100
        if args.dataset not in ("cifar10", "cifar100"):
            raise ExportError("resnet50 export expects --dataset cifar10|cifar100")
        model = load_backbone(args.checkpoint)
        from .export import encoder_fingerprint

        train, test = load_cifar(args.data_root, classes=classes)
        meta = {"encoder": "resnet50-pool", "checkpoint": args.checkpoint,
                "encoder_weights": encoder_fingerprint(model),
                "upsample": "128x128 bicubic", "dataset": args.dataset,
                "seed": args.seed}
        path = export_dataset(
            lambda imgs: encode_cifar_images(model, imgs),
            FEATURE_DIM, train, test, args.out,
            source=f"resnet50-{args.dataset}", meta=meta,
        )
    print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="emcl-export",
        description="Produce EMC1 embedding datasets from images "
        "through frozen encoders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain-vae", help="train the VAE, save the encoder")
    p.add_argument("--out", required=True, help="encoder checkpoint to write")
    p.add_argument("--data-root", help="directory holding Omniglot")
    p.add_argument("--synthetic", type=int, default=0, metavar="PER_CLASS",
                   help="train on procedural glyphs instead of Omniglot")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.001)
    p.add_argument("--batches", type=int, default=10_000)
    p.add_argument("--batch-size", type=int, default=48)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--threshold", type=float, default=0.025,
                   help="held-out reconstruction ceiling before retraining")
    p.add_argument("--max-retrains", type=int, default=2)
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_pretrain_vae)

    p = sub.add_parser("export", help="encode a dataset into an EMC1 file")
    p.add_argument("--kind", choices=("vae", "resnet50"), default="vae")
    p.add_argument("--encoder", help="saved VAE encoder (kind=vae)")
    p.add_argument("--checkpoint", help="backbone weights (kind=resnet50)")
    p.add_argument("--dataset",
                   choices=("mnist", "cifar10", "cifar100", "synthetic"),
                   default="mnist")
    p.add_argument("--data-root", help="torchvision dataset root")
    p.add_argument("--synthetic-per-class", type=int, default=50)
    p.add_argument("--out", required=True, help="EMC1 path to write")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataUnavailable as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ExportError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
