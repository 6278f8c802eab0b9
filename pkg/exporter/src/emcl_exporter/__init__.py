"""Embedding exporter: pretrain a small VAE on one glyph corpus, encode
another through the frozen mean head (or a pretrained backbone), and
write EMC1 files the learner consumes."""

from .backbone import encode_cifar_images, load_backbone
from .datasets import DataUnavailable, load_cifar, load_mnist, load_omniglot, synthetic_glyphs
from .emc_format import ExportError, write_embeddings
from .export import encoder_fingerprint, export_dataset, load_encoder, save_encoder
from .vae import Vae, VaeSpec, encode_images, held_out_reconstruction, pretrain_vae

__version__ = "0.1.0"

__all__ = [
    "DataUnavailable",
    "ExportError",
    "Vae",
    "VaeSpec",
    "encode_cifar_images",
    "encode_images",
    "encoder_fingerprint",
    "export_dataset",
    "held_out_reconstruction",
    "load_backbone",
    "load_cifar",
    "load_encoder",
    "load_mnist",
    "load_omniglot",
    "pretrain_vae",
    "save_encoder",
    "synthetic_glyphs",
    "write_embeddings",
]
