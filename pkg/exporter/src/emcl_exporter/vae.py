"""A small convolutional VAE whose frozen mean head embeds 28x28 images.

Encoder: two stride-1 'same' convolutions (kernel 4, 16 channels, ReLU)
followed by two linear heads of sizes 12544->128->512: the mean head
ends in tanh, the deviation head in ReLU.  The decoder mirrors it
(512->128->12544 linears, then two stride-1 convolutions back down to
one channel with a sigmoid).  Stride-1 'same' convolutions stand in for
the transpose convolutions: at stride 1 the two are the same operation,
and they keep every intermediate at 28x28 so the 28*28*16 decoder
width works out.

Pretraining minimizes  mean|x - xhat|^2 + beta * KL(N(mu, sigma), N(0, 1))
with both terms on per-element scales (mean squared pixel error, mean
per-dimension KL).  After training, the encoder is re-trained from
scratch when its held-out reconstruction error exceeds the retrain
threshold; only the frozen mean head is ever used downstream.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .emc_format import ExportError

IMG = 28
CHANNELS = 16
FLAT = IMG * IMG * CHANNELS  # 12544
HIDDEN = 128
LATENT = 512

# ReLU deviation head can emit exact zeros; floor keeps the KL finite
_SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class VaeSpec:
    beta: float = 0.001
    batches: int = 10_000
    batch_size: int = 48
    lr: float = 0.001
    recon_threshold: float = 0.025
    max_retrains: int = 2

    def describe(self) -> dict:
        arch = {
            "encoder": "conv(1->16,k4,s1,same)+relu, conv(16->16,k4,s1,same)+relu, "
                       "heads 12544->128(relu)->512 (means: tanh, stds: relu)",
            "decoder": "512->128(relu)->12544(relu), conv(16->16,k4,s1,same)+relu, "
                       "conv(16->1,k4,s1,same)+sigmoid",
            "latent": LATENT,
        }
        return {"arch": arch, **asdict(self)}


class Encoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(1, CHANNELS, 4, stride=1, padding="same"),
            nn.ReLU(),
            nn.Conv2d(CHANNELS, CHANNELS, 4, stride=1, padding="same"),
            nn.ReLU(),
            nn.Flatten(),
        )
        self.mean_head = nn.Sequential(
            nn.Linear(FLAT, HIDDEN), nn.ReLU(), nn.Linear(HIDDEN, LATENT), nn.Tanh()
        )
        self.std_head = nn.Sequential(
            nn.Linear(FLAT, HIDDEN), nn.ReLU(), nn.Linear(HIDDEN, LATENT), nn.ReLU()
        )

    def forward(self, x):
        h = self.features(x)
        return self.mean_head(h), self.std_head(h)


class Decoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.expand = nn.Sequential(
            nn.Linear(LATENT, HIDDEN), nn.ReLU(),
            nn.Linear(HIDDEN, FLAT), nn.ReLU(),
        )
        self.deconv = nn.Sequential(
            nn.Conv2d(CHANNELS, CHANNELS, 4, stride=1, padding="same"),
            nn.ReLU(),
            nn.Conv2d(CHANNELS, 1, 4, stride=1, padding="same"),
            nn.Sigmoid(),
        )

    def forward(self, z):
        h = self.expand(z).view(-1, CHANNELS, IMG, IMG)
        return self.deconv(h)


class Vae(nn.Module):
    def __init__(self):
        super().__init__()
        self.encoder = Encoder()
        self.decoder = Decoder()

    def forward(self, x):
        mu, sigma = self.encoder(x)
        eps = torch.randn_like(mu)
        xhat = self.decoder(mu + sigma * eps)
        return xhat, mu, sigma


def reconstruction_loss(x, xhat):
    """Mean squared error per pixel."""
    return torch.mean((x - xhat) ** 2)


def kl_divergence(mu, sigma):
    """KL(N(mu, sigma) || N(0, 1)) per latent dimension, batch mean.

    Means (like the per-pixel reconstruction term) rather than sums:
    with a 512-wide latent, a summed KL at beta=0.001 would dwarf the
    mean reconstruction error and push sigma to 1, wrecking the mean
    head the downstream learner uses.
    """
    var = (sigma + _SIGMA_FLOOR) ** 2
    per_dim = 0.5 * (var + mu**2 - 1.0 - torch.log(var))
    return per_dim.mean()


def vae_loss(x, xhat, mu, sigma, beta):
    return reconstruction_loss(x, xhat) + beta * kl_divergence(mu, sigma)


def _as_tensor(images) -> torch.Tensor:
    x = torch.as_tensor(np.asarray(images), dtype=torch.float32)
    if x.ndim == 3:
        x = x[:, None, :, :]
    if x.shape[-2:] != (IMG, IMG) or x.ndim != 4:
        raise ExportError(f"expected Nx1x{IMG}x{IMG} images, got {tuple(x.shape)}")
    return x


def held_out_reconstruction(model, images, batch_size=256) -> float:
    """Mean per-pixel reconstruction error using the mean latent only."""
    x = _as_tensor(images)
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for lo in range(0, x.shape[0], batch_size):
            chunk = x[lo : lo + batch_size]
            mu, _ = model.encoder(chunk)
            xhat = model.decoder(mu)
            total += float(((chunk - xhat) ** 2).mean()) * chunk.shape[0]
            count += chunk.shape[0]
    return total / count


def _train_once(train_images, spec, seed, log_every=0):
    torch.manual_seed(seed)
    model = Vae()
    opt = torch.optim.Adam(model.parameters(), lr=spec.lr)
    x = _as_tensor(train_images)
    rng = np.random.default_rng(seed)
    model.train()
    for step in range(spec.batches):
        picks = rng.integers(x.shape[0], size=spec.batch_size)
        batch = x[torch.as_tensor(picks, dtype=torch.long)]
        xhat, mu, sigma = model(batch)
        loss = vae_loss(batch, xhat, mu, sigma, spec.beta)
        opt.zero_grad()
        loss.backward()
        opt.step()
        if log_every and (step + 1) % log_every == 0:
            print(
                f"  batch {step + 1}/{spec.batches}: "
                f"loss {float(loss.detach()):.4f}"
            )
    return model


def pretrain_vae(train_images, holdout_images, spec: VaeSpec, seed: int,
                 log_every=0):
    """Train the VAE, retraining from scratch while the held-out
    reconstruction error exceeds the threshold; returns the frozen
    encoder and the final error.  Raises once the retry budget is spent.
    """
    last = float("inf")
    for attempt in range(spec.max_retrains + 1):
        model = _train_once(train_images, spec, seed + attempt, log_every)
        last = held_out_reconstruction(model, holdout_images)
        if log_every:
            print(f"  attempt {attempt}: held-out reconstruction {last:.4f}")
        if last <= spec.recon_threshold:
            encoder = model.encoder
            encoder.eval()
            for p in encoder.parameters():
                p.requires_grad_(False)
            return encoder, last
    raise ExportError(
        f"VAE reconstruction {last:.4f} still above "
        f"{spec.recon_threshold} after {spec.max_retrains + 1} attempts"
    )


def encode_images(encoder, images, batch_size=256) -> np.ndarray:
    """Frozen mean-head embeddings, float32 (N, 512)."""
    x = _as_tensor(images)
    out = []
    encoder.eval()
    with torch.no_grad():
        for lo in range(0, x.shape[0], batch_size):
            mu, _ = encoder(x[lo : lo + batch_size])
            out.append(mu.numpy().astype(np.float32))
    return np.concatenate(out) if out else np.empty((0, LATENT), np.float32)
