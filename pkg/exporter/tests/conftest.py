import numpy as np
import pytest

from emcl_exporter import VaeSpec, pretrain_vae, synthetic_glyphs


@pytest.fixture(scope="session")
def glyph_corpus():
    """A diverse glyph pool: 20 prototype classes, 1000 renderings each
    (small-pool training just memorizes; reconstruction quality needs
    data diversity, like the real use case)."""
    images, labels = synthetic_glyphs(m=20, per_class=1000, seed=3)
    return images, labels


@pytest.fixture(scope="session")
def trained_encoder(glyph_corpus):
    """One real pretraining run shared by the slower tests: 500 batches
    reaches the production reconstruction threshold on held-out data."""
    images, _ = glyph_corpus
    spec = VaeSpec(batches=500, batch_size=32, recon_threshold=0.025,
                   max_retrains=0)
    order = np.random.default_rng(0).permutation(images.shape[0])
    held, train = images[order[:300]], images[order[300:]]
    encoder, recon = pretrain_vae(train, held, spec, seed=4)
    return encoder, recon, spec
