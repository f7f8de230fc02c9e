"""
Toy-scale adversarial training.

Two discriminators judge renders of generated textures: one sees neural-field
renders, the other flat per-face proxy renders. Each step updates both
discriminators, then the encoder, generator and field through both render
paths. R1 and path-length penalties are applied lazily.
"""
import asyncio
import json
import logging
import math

import numpy as np
from tqdm import tqdm

from . import diff
from .config import RenderConfig, TrainConfig
from .exceptions import ShapeMismatch, TrainingDiverged
from .generator import TextureLatent
from .render import Camera, rasterize_views, shade, shade_coarse
from .weights import WeightSet, he_normal

__all__ = ['Discriminator', 'Trainer', 'PathLengthState', 'PathLengthResult', 'gan_losses', 'generator_loss',
           'r1_penalty', 'path_length_reg', 'discriminator_accuracy', 'random_cameras']


LOG = logging.getLogger(__name__)

LRELU_SLOPE = 0.2


class Discriminator:
    """``[conv3x3 -> leaky relu -> 2x average pool] * len(channels)`` then a linear head on the flattened map."""

    def __init__(self, prefix, channels, image_size, weights=None, rng=None):
        self.prefix = prefix
        self.channels = list(channels)
        self.image_size = int(image_size)
        if self.image_size % (2 ** len(self.channels)):
            raise ShapeMismatch('image size {0} is not divisible by 2^{1}'.format(self.image_size,
                                                                                 len(self.channels)))
        self.weights = weights if weights is not None else WeightSet()
        if rng is not None:
            self._init(rng)

    def _init(self, rng):
        previous = 3
        for i, width in enumerate(self.channels):
            self.weights.add('{0}.conv.{1}.weight'.format(self.prefix, i),
                             he_normal(rng, (width, previous, 3, 3), previous * 9))
            self.weights.add('{0}.conv.{1}.bias'.format(self.prefix, i), np.zeros(width))
            previous = width
        flat = previous * (self.image_size // 2 ** len(self.channels)) ** 2
        self.weights.add('{}.head.weight'.format(self.prefix), he_normal(rng, (flat, 1), flat, gain=1.0))
        self.weights.add('{}.head.bias'.format(self.prefix), np.zeros(1))

    def _conv(self, i):
        return self.weights['{0}.conv.{1}.weight'.format(self.prefix, i)]

    def _forward(self, images):
        images = diff.as_tensor(images)
        if images.ndim != 4 or images.shape[1:] != (self.image_size, self.image_size, 3):
            raise ShapeMismatch('discriminator expects (N, {0}, {0}, 3) images, got {1}'.format(
                self.image_size, images.shape))
        x = diff.transpose(images, (0, 3, 1, 2))
        slopes = []
        for i in range(len(self.channels)):
            x = diff.conv2d(x, self._conv(i), self.weights['{0}.conv.{1}.bias'.format(self.prefix, i)])
            slopes.append(np.where(x.data > 0, 1.0, LRELU_SLOPE).astype(x.data.dtype))
            x = diff.avgpool2x(diff.leaky_relu(x, LRELU_SLOPE))
        flat = diff.reshape(x, (images.shape[0], -1))
        logits = flat @ self.weights['{}.head.weight'.format(self.prefix)] + self.weights['{}.head.bias'.format(
            self.prefix)]
        return diff.reshape(logits, (-1,)), slopes, x.shape

    def __call__(self, images):
        """(N,) logits of an (N, H, W, 3) batch."""
        return self._forward(images)[0]

    def input_gradient(self, images):
        """
        Gradient of ``sum(D(images))`` w.r.t. the images as a graph over the discriminator weights,
        so penalties on it can be differentiated once more. Returned in NCHW layout.
        """
        with diff.no_grad():
            _, slopes, pooled_shape = self._forward(images)
        n = pooled_shape[0]
        head = self.weights['{}.head.weight'.format(self.prefix)]
        g = diff.matmul(np.ones((n, 1), dtype=head.data.dtype), diff.transpose(head))
        g = diff.reshape(g, pooled_shape)
        for i in reversed(range(len(self.channels))):
            g = diff.upsample2x(g) * 0.25
            g = g * slopes[i]
            flipped = diff.transpose(self._conv(i), (1, 0, 2, 3))[:, :, ::-1, ::-1]
            g = diff.conv2d(g, flipped)
        return g

    def __repr__(self):
        return '<Discriminator prefix={0} channels={1} size={2}>'.format(self.prefix, self.channels,
                                                                        self.image_size)


def gan_losses(real_logits, fake_logits):
    """Non-saturating logistic losses: (softplus(-real) + softplus(fake), softplus(-fake)), batch means."""
    real_logits, fake_logits = diff.as_tensor(real_logits), diff.as_tensor(fake_logits)
    d_loss = diff.mean(diff.softplus(-real_logits)) + diff.mean(diff.softplus(fake_logits))
    return d_loss, generator_loss(fake_logits)


def generator_loss(fake_logits):
    return diff.mean(diff.softplus(-diff.as_tensor(fake_logits)))


def r1_penalty(discriminator, real_images):
    """Batch mean of the squared image-gradient norm of the discriminator at real images."""
    real_images = diff.to_numpy(real_images)
    g = discriminator.input_gradient(real_images)
    return diff.tsum(g * g) / float(real_images.shape[0])


def discriminator_accuracy(real_logits, fake_logits):
    real, fake = diff.to_numpy(real_logits), diff.to_numpy(fake_logits)
    return float((np.sum(real > 0) + np.sum(fake < 0)) / (real.size + fake.size))


class PathLengthState:
    def __init__(self, ema=0.0, decay=0.01):
        self.ema = float(ema)
        self.decay = float(decay)

    def update(self, lengths):
        self.ema += self.decay * (float(np.mean(lengths)) - self.ema)
        return self.ema


class PathLengthResult:
    def __init__(self, penalty, lengths, surrogate):
        self.penalty = penalty
        self.lengths = lengths
        self.surrogate = surrogate


def path_length_reg(synthesize, ws, state, rng, step=1e-2):
    """
    Path-length regularization of ``synthesize(w) -> image`` over style vectors ``ws``.

    ``penalty`` is the mean of ``(|J^T y| - ema)^2`` with the running mean updated first.
    ``surrogate`` is a scalar whose parameter gradient equals the penalty's: the Jacobian-vector
    product inside it is a central difference along ``J^T y``, which keeps the regularizer first order.
    """
    lengths, directions, projections = [], [], []
    for w in ws:
        w = diff.Tensor(diff.to_numpy(w), requires_grad=True)
        image = synthesize(w)
        y = rng.standard_normal(image.shape) / math.sqrt(image.size)
        (jty,) = diff.grad(diff.tsum(image * y), [w], retain_graph=False)
        lengths.append(float(np.linalg.norm(jty)))
        directions.append((w.data, jty))
        projections.append(y)
    lengths = np.array(lengths)
    ema = state.update(lengths)
    penalty = float(np.mean((lengths - ema) ** 2))

    surrogate = diff.as_tensor(0.0)
    for length, (w, jty), y in zip(lengths, directions, projections):
        if length == 0:
            continue
        eps = step / length
        plus = synthesize(diff.as_tensor(w + eps * jty))
        minus = synthesize(diff.as_tensor(w - eps * jty))
        jvp = diff.tsum((plus - minus) * (y / (2.0 * eps)))
        surrogate = surrogate + jvp * (2.0 * (length - ema) / length / len(ws))
    return PathLengthResult(penalty, lengths, surrogate)


def random_cameras(rng, count, render_config, image_size):
    low, high = render_config.elevation_range
    return [Camera(rng.uniform(0.0, 2.0 * math.pi), rng.uniform(low, high), render_config.distance,
                   render_config.fov, image_size) for _ in range(count)]


class Trainer:
    """
    Adversarial trainer over a set of :class:`Shape` and a bank of real (N, H, W, 3) images.

    ``executor`` (a ``concurrent.futures`` executor) rasterizes the views of a step concurrently.
    """

    GROUPS = (('enc.', 0), ('gen.', 1), ('psi.', 2))

    def __init__(self, model, shapes, reals, cfg=None, render_config=None, executor=None):
        self.model = model
        self.shapes = list(shapes)
        self.reals = np.asarray(reals, dtype=np.float32)
        self.cfg = cfg or TrainConfig()
        self.render_config = render_config or RenderConfig()
        self.executor = executor
        size = self.cfg.image_size
        if self.reals.ndim != 4 or self.reals.shape[1:] != (size, size, 3):
            raise ShapeMismatch('real images must be (N, {0}, {0}, 3), got {1}'.format(size, self.reals.shape))
        self.rng = np.random.default_rng(self.cfg.seed)
        self.disc_weights = WeightSet()
        self.disc_field = Discriminator('disc.field', self.cfg.disc_channels, size, self.disc_weights, self.rng)
        self.disc_coarse = Discriminator('disc.coarse', self.cfg.disc_channels, size, self.disc_weights, self.rng)
        beta1, beta2 = self.cfg.betas
        self.g_optimizers = [
            diff.Adam([t for name, t in model.weights.items() if name.startswith(prefix)],
                      lr=self.cfg.lrs[index], betas=(beta1, beta2))
            for prefix, index in self.GROUPS]
        self.d_optimizer = diff.Adam(list(self.disc_weights.values()), lr=self.cfg.lr_discriminator,
                                     betas=(beta1, beta2))
        self.pl_state = PathLengthState(decay=self.cfg.pl_decay)
        self.step = 0

    def _sample_reals(self, count):
        return self.reals[self.rng.choice(len(self.reals), count)]

    def d_step(self, reals, fake_field, fake_coarse=None, regularize=False):
        """One discriminator update on constant (N, H, W, 3) batches."""
        real_logits = self.disc_field(reals)
        fake_logits = self.disc_field(fake_field)
        d_loss, _ = gan_losses(real_logits, fake_logits)
        if fake_coarse is not None:
            d_coarse, _ = gan_losses(self.disc_coarse(reals), self.disc_coarse(fake_coarse))
            d_loss = d_loss + d_coarse
        total = d_loss
        r1 = None
        if regularize and self.cfg.r1_weight:
            r1 = r1_penalty(self.disc_field, reals)
            if fake_coarse is not None:
                r1 = r1 + r1_penalty(self.disc_coarse, reals)
            total = total + r1 * (self.cfg.r1_weight * self.cfg.r1_interval)
        self.d_optimizer.zero_grad()
        diff.backward(total)
        self.d_optimizer.step()
        self.d_optimizer.zero_grad()
        return {
            'd_loss': float(d_loss.data),
            'r1': float(r1.data) if r1 is not None else None,
            'd_acc': discriminator_accuracy(real_logits, fake_logits),
        }

    def _render(self, shape, latent, frags, noise_seed, skips=None):
        features, coarse_rgb = self.model.features(shape, latent, noise_seed, skips)
        field = [shade(frag, features, self.model.field, shape.mesh) for frag in frags]
        coarse = [shade_coarse(frag, coarse_rgb) for frag in frags]
        return field, coarse

    def _g_step(self, batch, regularize):
        self.disc_weights.freeze()
        try:
            field, coarse = [], []
            for shape, latent, frags, noise_seed in batch:
                f, c = self._render(shape, latent, frags, noise_seed)
                field.extend(f)
                coarse.extend(c)
            g_loss = generator_loss(self.disc_field(diff.stack(field))) + generator_loss(
                self.disc_coarse(diff.stack(coarse)))
            total = g_loss
            pl = None
            if regularize and self.cfg.pl_weight:
                shape, latent, frags, noise_seed = batch[0]
                noise = self.model.generator.make_noise(shape.hierarchy, noise_seed)
                with diff.no_grad():
                    skips = self.model.generator.encode(shape)

                def synthesize(w):
                    features, _ = self.model.generator.synthesize(w, skips, shape.hierarchy, noise)
                    return shade(frags[0], features, self.model.field, shape.mesh)

                with diff.no_grad():
                    ws = [self.model.generator.mapping(item[1].z).data for item in batch]
                result = path_length_reg(synthesize, ws, self.pl_state, self.rng)
                pl = result.penalty
                total = total + result.surrogate * (self.cfg.pl_weight * self.cfg.pl_interval)
            for optimizer in self.g_optimizers:
                optimizer.zero_grad()
            diff.backward(total)
            for optimizer in self.g_optimizers:
                optimizer.step()
                optimizer.zero_grad()
        finally:
            self.disc_weights.unfreeze()
        return {'g_loss': float(g_loss.data), 'pl': pl}

    async def train_step(self):
        """One D step then one G step; returns the step's metrics."""
        cfg = self.cfg
        picks = self.rng.choice(len(self.shapes), cfg.batch)
        batch = []
        for pick in picks:
            shape = self.shapes[pick]
            cameras = random_cameras(self.rng, cfg.views_per_shape, self.render_config, cfg.image_size)
            frags = await rasterize_views(shape.mesh, cameras, self.executor)
            latent = TextureLatent.sample(self.rng, self.model.config.z_dim)
            batch.append((shape, latent, frags, int(self.rng.integers(0, 2 ** 31 - 1))))

        with diff.no_grad():
            fake_field, fake_coarse = [], []
            for shape, latent, frags, noise_seed in batch:
                f, c = self._render(shape, TextureLatent(latent.z), frags, noise_seed)
                fake_field.extend(t.data for t in f)
                fake_coarse.extend(t.data for t in c)
        reals = self._sample_reals(len(fake_field))
        metrics = {'step': self.step}
        metrics.update(self.d_step(reals, np.stack(fake_field), np.stack(fake_coarse),
                                   regularize=self.step % cfg.r1_interval == 0))
        metrics.update(self._g_step(batch, regularize=self.step % cfg.pl_interval == 0))
        self._check_finite(metrics)
        self.step += 1
        LOG.debug('Step %d: %s', metrics['step'], metrics)
        return metrics

    def _check_finite(self, metrics):
        values = [v for v in metrics.values() if v is not None]
        if all(np.isfinite(values)):
            return
        bad = [name for name, tensor in list(self.model.weights.items()) + list(self.disc_weights.items())
               if not np.isfinite(tensor.data).all()]
        raise TrainingDiverged('non-finite loss at step {}'.format(self.step),
                               diagnostics={'metrics': metrics, 'non_finite_tensors': bad,
                                            'pl_ema': self.pl_state.ema})

    async def train(self, iters=None, metrics_path=None, checkpoint_path=None, progress=False):
        iters = self.cfg.iters if iters is None else iters
        history = []
        log = open(metrics_path, 'a') if metrics_path else None
        try:
            for _ in tqdm(range(iters), desc='train', disable=not progress):
                metrics = await self.train_step()
                history.append(metrics)
                if log:
                    log.write(json.dumps(metrics) + '\n')
                    log.flush()
                if checkpoint_path and self.cfg.checkpoint_every and self.step % self.cfg.checkpoint_every == 0:
                    self.save(checkpoint_path)
                await asyncio.sleep(0)
        finally:
            if log:
                log.close()
        if checkpoint_path:
            self.save(checkpoint_path)
        return history

    def save(self, path):
        self.model.save(path)
        self.disc_weights.save(str(path) + '.disc')

    def __repr__(self):
        return '<Trainer step={0} shapes={1} reals={2}>'.format(self.step, len(self.shapes), len(self.reals))
