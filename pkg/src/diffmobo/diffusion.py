"""Denoising diffusion model over decision vectors in [-1, 1]^d.

A small fully connected network predicts the noise added by a closed-form
forward process; reverse sampling runs the standard fixed-variance update,
optionally perturbed each step by an external guidance vector scaled by the
squared step deviation. Timesteps are 1-based: ``t`` runs from 1 to ``T``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg.blas import saxpy

from ._blas import single_thread_blas

from .errors import InvalidArgumentError, InvalidDataError

_HIDDEN = 128


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise levels and their running products."""

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray


def make_schedule(T: int, beta_min: float = 1e-5, beta_max: float = 5e-2) -> NoiseSchedule:
    """Linear noise-level schedule from ``beta_min`` to ``beta_max`` over T steps."""
    if T < 1:
        raise InvalidArgumentError(f"need T >= 1, got {T}")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise InvalidArgumentError(
            f"need 0 < beta_min <= beta_max < 1, got ({beta_min}, {beta_max})"
        )
    beta = np.linspace(beta_min, beta_max, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    sigma = np.sqrt(beta)
    for arr in (beta, alpha, alpha_bar, sigma):
        arr.setflags(write=False)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar, sigma=sigma)


def _check_t(t: int, sched: NoiseSchedule) -> int:
    if not 1 <= t <= sched.T:
        raise InvalidArgumentError(f"step t={t} outside [1, {sched.T}]")
    return t - 1


def forward_sample(x0: np.ndarray, t: int, sched: NoiseSchedule, noise: np.ndarray) -> np.ndarray:
    """Closed-form noised sample at step ``t``: sqrt(abar_t) x0 + sqrt(1-abar_t) z."""
    i = _check_t(t, sched)
    x0 = np.asarray(x0, dtype=float)
    noise = np.asarray(noise, dtype=float)
    return np.sqrt(sched.alpha_bar[i]) * x0 + np.sqrt(1.0 - sched.alpha_bar[i]) * noise


@dataclass(frozen=True)
class DenoiseNet:
    """Noise-prediction MLP: (x, t/T) -> predicted noise, two hidden layers."""

    d: int
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    def params(self) -> tuple[np.ndarray, ...]:
        return (self.W1, self.b1, self.W2, self.b2, self.W3, self.b3)


def make_net(d: int, seed: int) -> DenoiseNet:
    """Initialize network weights uniformly in +-sqrt(1/fan_in) per layer."""
    if d < 1:
        raise InvalidArgumentError(f"need d >= 1, got {d}")
    rng = np.random.default_rng(seed)

    def layer(fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
        bound = np.sqrt(1.0 / fan_in)
        return (
            rng.uniform(-bound, bound, (fan_in, fan_out)),
            rng.uniform(-bound, bound, fan_out),
        )

    W1, b1 = layer(d + 1, _HIDDEN)
    W2, b2 = layer(_HIDDEN, _HIDDEN)
    W3, b3 = layer(_HIDDEN, d)
    return DenoiseNet(d=d, W1=W1, b1=b1, W2=W2, b2=b2, W3=W3, b3=b3)


def predict_noise(net: DenoiseNet, x: np.ndarray, t: np.ndarray | int, T: int) -> np.ndarray:
    """Forward pass; accepts a single sample (d,) or a batch (m, d)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    t_col = np.broadcast_to(np.asarray(t, dtype=float), (X.shape[0],))[:, None] / T
    inp = np.concatenate([X, t_col], axis=1)
    h1 = np.maximum(inp @ net.W1 + net.b1, 0.0)
    h2 = np.maximum(h1 @ net.W2 + net.b2, 0.0)
    out = h2 @ net.W3 + net.b3
    return out[0] if single else out


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 4000
    batch: int = 1024
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass(frozen=True)
class GenerationConfig:
    n_conditional: int = 10
    n_unconditional: int = 100
    max_gradient_norm: float = 1.0


def train(
    net: DenoiseNet,
    data: np.ndarray,
    sched: NoiseSchedule,
    cfg: TrainConfig,
    seed: int,
) -> tuple[DenoiseNet, np.ndarray]:
    """Train a copy of ``net`` to predict injected noise; returns it with the
    per-epoch loss history.

    Each epoch draws one minibatch (clamped to the dataset size), a uniform
    step per item, and fresh Gaussian noise, then takes a single Adam step on
    the mean squared noise-prediction error. Arithmetic runs in float32 with
    preallocated buffers (thousands of epochs on small batches are overhead
    bound); the returned parameters are float64.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    if n < 2:
        raise InvalidDataError(f"need at least 2 training samples, got {n}")
    if d != net.d:
        raise InvalidDataError(f"data dimension {d} does not match network dimension {net.d}")
    if cfg.epochs < 1:
        raise InvalidArgumentError(f"need epochs >= 1, got {cfg.epochs}")
    if cfg.batch < 1:
        raise InvalidArgumentError(f"need batch >= 1, got {cfg.batch}")
    if cfg.lr <= 0:
        raise InvalidArgumentError(f"need lr > 0, got {cfg.lr}")

    f32 = np.float32
    rng = np.random.default_rng(seed)
    batch = min(cfg.batch, n)
    data32 = data.astype(f32)
    H = _HIDDEN

    # All parameters live in one flat vector; the per-layer matrices are views
    # into it, so a single vectorized Adam update moves the whole network.
    shapes = [(d + 1, H), (H,), (H, H), (H,), (H, d), (d,)]
    sizes = [int(np.prod(s)) for s in shapes]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    flat = np.concatenate([p.ravel() for p in net.params()]).astype(f32)
    gflat = np.zeros_like(flat)
    views = [
        flat[offsets[i] : offsets[i + 1]].reshape(shape) for i, shape in enumerate(shapes)
    ]
    gviews = [
        gflat[offsets[i] : offsets[i + 1]].reshape(shape) for i, shape in enumerate(shapes)
    ]
    W1, b1v, W2, b2v, W3, b3v = views
    gW1, gb1, gW2, gb2, gW3, gb3 = gviews

    m_state = np.zeros_like(flat)
    v_state = np.zeros_like(flat)
    tmp = np.empty_like(flat)
    beta1, beta2, eps = f32(cfg.adam_beta1), f32(cfg.adam_beta2), f32(cfg.adam_eps)

    sqrt_ab = np.sqrt(sched.alpha_bar).astype(f32)
    sqrt_1mab = np.sqrt(1.0 - sched.alpha_bar).astype(f32)
    t_over_T = (np.arange(1, sched.T + 1, dtype=f32) / f32(sched.T)).astype(f32)
    losses = np.empty(cfg.epochs)

    z1 = np.empty((batch, H), dtype=f32)
    z2 = np.empty((batch, H), dtype=f32)
    out = np.empty((batch, d), dtype=f32)
    gh2 = np.empty((batch, H), dtype=f32)
    gh1 = np.empty((batch, H), dtype=f32)
    m1 = np.empty((batch, H), dtype=bool)
    m2 = np.empty((batch, H), dtype=bool)
    ones_b = np.ones(batch, dtype=f32)

    # noise and steps are drawn in chunks to amortize generator overhead
    chunk = max(1, min(cfg.epochs, 4_000_000 // max(1, batch * d)))
    inv_size = f32(2.0 / (batch * d))

    with single_thread_blas():  # small matmuls: avoid BLAS thread thrash
        epoch = 0
        while epoch < cfg.epochs:
            block = min(chunk, cfg.epochs - epoch)
            t_blk = rng.integers(1, sched.T + 1, (block, batch))
            noise_blk = rng.standard_normal((block, batch, d), dtype=f32)
            if batch == n:
                # precompute entire noised inputs for the block at once
                ti_blk = t_blk - 1
                inp_blk = np.empty((block, batch, d + 1), dtype=f32)
                np.multiply(sqrt_ab[ti_blk][:, :, None], data32[None, :, :], out=inp_blk[:, :, :d])
                inp_blk[:, :, :d] += sqrt_1mab[ti_blk][:, :, None] * noise_blk
                inp_blk[:, :, d] = t_over_T[ti_blk]

            for j in range(block):
                noise = noise_blk[j]
                if batch == n:
                    inp = inp_blk[j]
                else:
                    x0 = data32[rng.choice(n, size=batch, replace=False)]
                    ti = t_blk[j] - 1
                    inp = np.empty((batch, d + 1), dtype=f32)
                    np.multiply(sqrt_ab[ti][:, None], x0, out=inp[:, :d])
                    inp[:, :d] += sqrt_1mab[ti][:, None] * noise
                    inp[:, d] = t_over_T[ti]

                np.matmul(inp, W1, out=z1)
                z1 += b1v
                np.greater(z1, 0.0, out=m1)
                np.maximum(z1, 0.0, out=z1)  # z1 now holds h1
                np.matmul(z1, W2, out=z2)
                z2 += b2v
                np.greater(z2, 0.0, out=m2)
                np.maximum(z2, 0.0, out=z2)  # z2 now holds h2
                np.matmul(z2, W3, out=out)
                out += b3v

                out -= noise  # out now holds the prediction error
                flat_err = out.ravel()
                losses[epoch] = float(flat_err @ flat_err) / flat_err.size
                out *= inv_size

                np.matmul(z2.T, out, out=gW3)
                np.matmul(ones_b, out, out=gb3)
                np.matmul(out, W3.T, out=gh2)
                gh2 *= m2
                np.matmul(z1.T, gh2, out=gW2)
                np.matmul(ones_b, gh2, out=gb2)
                np.matmul(gh2, W2.T, out=gh1)
                gh1 *= m1
                np.matmul(inp.T, gh1, out=gW1)
                np.matmul(ones_b, gh1, out=gb1)

                c1 = 1.0 - cfg.adam_beta1 ** (epoch + 1)
                c2 = 1.0 - cfg.adam_beta2 ** (epoch + 1)
                m_state *= beta1
                saxpy(gflat, m_state, a=1.0 - cfg.adam_beta1)
                v_state *= beta2
                np.multiply(gflat, gflat, out=tmp)
                saxpy(tmp, v_state, a=1.0 - cfg.adam_beta2)
                np.divide(v_state, f32(c2), out=tmp)
                np.sqrt(tmp, out=tmp)
                tmp += eps
                np.divide(m_state, tmp, out=tmp)
                saxpy(tmp, flat, a=-cfg.lr / c1)
                epoch += 1

    trained = replace(
        net,
        W1=views[0].astype(float),
        b1=views[1].astype(float),
        W2=views[2].astype(float),
        b2=views[3].astype(float),
        W3=views[4].astype(float),
        b3=views[5].astype(float),
    )
    return trained, losses


def denoise_step(
    net: DenoiseNet, x_t: np.ndarray, t: int, sched: NoiseSchedule, z: np.ndarray
) -> np.ndarray:
    """One unconditional reverse step from ``x_t`` to ``x_{t-1}``.

    At the final step (t = 1) the noise term is suppressed so the chain ends
    on a clean sample.
    """
    i = _check_t(t, sched)
    x_t = np.asarray(x_t, dtype=float)
    eps_pred = predict_noise(net, x_t, t, sched.T)
    mean = (x_t - (1.0 - sched.alpha[i]) / np.sqrt(1.0 - sched.alpha_bar[i]) * eps_pred) / np.sqrt(
        sched.alpha[i]
    )
    if t == 1:
        return mean
    return mean + sched.sigma[i] * np.asarray(z, dtype=float)


def guided_denoise_step(
    net: DenoiseNet,
    x_t: np.ndarray,
    t: int,
    sched: NoiseSchedule,
    g_hat: np.ndarray,
    z: np.ndarray,
) -> np.ndarray:
    """Reverse step with an additive guidance pull of sigma_t^2 * g_hat.

    Implemented literally as the unconditional step plus the guidance term so
    the two operations superpose exactly.
    """
    g_hat = np.asarray(g_hat, dtype=float)
    if not np.all(np.isfinite(g_hat)):
        raise InvalidArgumentError("guidance vector contains non-finite values")
    i = _check_t(t, sched)
    return denoise_step(net, x_t, t, sched, z) + sched.sigma[i] ** 2 * g_hat


def generate_composite(
    net: DenoiseNet,
    sched: NoiseSchedule,
    gen: GenerationConfig,
    guidance,
    seed: int,
) -> np.ndarray:
    """Run ``n_conditional`` guided and ``n_unconditional`` plain reverse chains.

    Chain ``i`` of either block draws from the stream ``(seed, i)``, so with a
    null guidance the two blocks coincide row for row. The guidance callable is
    queried each step on the current iterate clipped to [-1, 1]; all final
    samples are clipped to [-1, 1].
    """
    if gen.n_conditional + gen.n_unconditional < 1:
        raise InvalidArgumentError("need at least one sample to generate")
    if gen.n_conditional > 0 and guidance is None:
        raise InvalidArgumentError("conditional generation requires a guidance callable")

    def run_block(count: int, guided: bool) -> np.ndarray:
        if count == 0:
            return np.empty((0, net.d))
        rngs = [np.random.default_rng([seed, i]) for i in range(count)]
        x = np.stack([r.standard_normal(net.d) for r in rngs])
        for t in range(sched.T, 0, -1):
            i = t - 1
            z = np.stack([r.standard_normal(net.d) for r in rngs])
            eps_pred = predict_noise(net, x, t, sched.T)
            mean = (
                x - (1.0 - sched.alpha[i]) / np.sqrt(1.0 - sched.alpha_bar[i]) * eps_pred
            ) / np.sqrt(sched.alpha[i])
            if guided:
                g_hat = np.stack([guidance(row) for row in np.clip(x, -1.0, 1.0)])
                mean = mean + sched.sigma[i] ** 2 * g_hat
            x = mean if t == 1 else mean + sched.sigma[i] * z
        return np.clip(x, -1.0, 1.0)

    cond = run_block(gen.n_conditional, guided=True)
    uncond = run_block(gen.n_unconditional, guided=False)
    return np.vstack([cond, uncond])
