"""
Built-in checks: finite-difference gradient checks of every differentiable
building block, and closed-form oracles for geometry and the adversarial terms.
"""
import logging
import math
import time

import numpy as np

from . import diff
from .config import ModelConfig
from .field import NeuralField, init_field_weights, quad_coords
from .gantrain import Discriminator, PathLengthState, gan_losses, path_length_reg, r1_penalty
from .generator import face_conv, face_pool, face_unpool, modulated_face_conv
from .geometry import Shape, make_cube
from .gradcheck import gradcheck
from .perceptual import build_tiny_extractor, pyramid_style_loss
from .weights import WeightSet

__all__ = ['SUITES', 'CheckResult', 'run_selftest', 'format_table']


LOG = logging.getLogger(__name__)

SUITES = ('fd', 'oracle')

_CHECKS = []


def check(suite):
    def decorator(fn):
        _CHECKS.append((suite, fn.__name__, fn))
        return fn
    return decorator


class CheckResult:
    def __init__(self, suite, name, ok, detail='', seconds=0.0):
        self.suite = suite
        self.name = name
        self.ok = ok
        self.detail = detail
        self.seconds = seconds

    def __repr__(self):
        return '<CheckResult {0}.{1} ok={2}>'.format(self.suite, self.name, self.ok)


def _away_from_zero(rng, shape):
    return rng.uniform(0.2, 1.0, shape) * rng.choice([-1.0, 1.0], shape)


def _report(report):
    return report.ok, 'max rel. error {:.1e}'.format(report.max_error)


@check('fd')
def elementwise(rng):
    def fn(a, b):
        return diff.tsum(a * b + a / (b * b + 1.0) - a ** 2 + diff.exp(a) * diff.log(b * b + 1.0))
    return _report(gradcheck(fn, [rng.standard_normal((3, 4)), rng.standard_normal((3, 4))]))


@check('fd')
def activations(rng):
    def fn(x):
        return diff.tsum(diff.tanh(x) + diff.sigmoid(x) + diff.softplus(x) + diff.leaky_relu(x) * diff.relu(x))
    return _report(gradcheck(fn, [_away_from_zero(rng, (4, 5))]))


@check('fd')
def matmul(rng):
    return _report(gradcheck(lambda a, b: diff.tsum(diff.tanh(a @ b)),
                             [rng.standard_normal((3, 4)), rng.standard_normal((4, 2))]))


@check('fd')
def conv2d(rng):
    def fn(x, w, b):
        return diff.tsum(diff.tanh(diff.conv2d(x, w, b)))
    return _report(gradcheck(fn, [rng.standard_normal((2, 2, 5, 5)), rng.standard_normal((3, 2, 3, 3)) * 0.3,
                                  rng.standard_normal(3)]))


@check('fd')
def pooling(rng):
    def fn(x):
        y = diff.avgpool2x(diff.upsample2x(x) * 2.0 + 1.0)
        return diff.tsum(diff.avgpool2x(x) ** 2) + diff.tsum(y * y)
    return _report(gradcheck(fn, [rng.standard_normal((1, 2, 4, 4))]))


@check('fd')
def gather_scatter(rng):
    index = np.array([2, 0, 2, 1])

    def fn(x):
        rows = diff.take(x, index)
        scattered = diff.index_add(rows * rows, index, 3)
        picked = x[1:, ::-1] + x[np.array([0, 0]), np.array([1, 2])].sum()
        return diff.tsum(scattered) + diff.tsum(picked * picked)
    return _report(gradcheck(fn, [rng.standard_normal((3, 3))]))


@check('fd')
def gram(rng):
    target = rng.standard_normal((3, 3))
    return _report(gradcheck(lambda f: diff.tsum((diff.gram(f, 12.0) - target) ** 2),
                             [rng.standard_normal((3, 6))]))


@check('fd')
def face_convolution(rng):
    hierarchy = Shape.from_mesh(make_cube(), 2, smooth=False).hierarchy
    fine = hierarchy[1]

    def fn(x, w, b, style):
        y = face_conv(x, w, b, fine.face_adjacency)
        y = modulated_face_conv(diff.tanh(y), w, style, fine.face_adjacency)
        pooled = face_pool(y, hierarchy.children_of[1])
        return diff.tsum(diff.tanh(face_unpool(pooled, hierarchy.parent_of[1]) + y))
    return _report(gradcheck(fn, [rng.standard_normal((fine.n_faces, 3)), rng.standard_normal((5, 3, 3)) * 0.5,
                                  rng.standard_normal(3), rng.uniform(0.5, 1.5, 3)], samples=12, rng=rng))


@check('fd')
def neural_field(rng):
    config = ModelConfig(levels=1, enc_channels=[4], dec_channels=[4], z_dim=4, w_dim=4, mapping_layers=1,
                         aux_dim=4, field_width=8, field_trunk=2)
    weights = WeightSet()
    init_field_weights(weights, config, rng)
    field = NeuralField(config, weights)
    halves = rng.integers(0, 2, 5)
    coords = quad_coords(halves, rng.dirichlet(np.ones(3), 5))

    def fn(features, aux):
        return diff.tsum(field(features, coords, aux))
    return _report(gradcheck(fn, [rng.standard_normal((5, 4)), rng.standard_normal(4)], eps=1e-6))


@check('fd')
def style_loss(rng):
    extractor = build_tiny_extractor()
    mask = np.ones((16, 16), dtype=bool)
    mask[:3] = False
    target = rng.uniform(-1.0, 1.0, (16, 16, 3))

    def fn(image):
        return pyramid_style_loss(image, mask, target, mask, extractor, levels=2)
    return _report(gradcheck(fn, [rng.uniform(-1.0, 1.0, (16, 16, 3))], samples=10, rng=rng, eps=1e-6,
                             tolerance=1e-2))


@check('fd')
def r1_double_backward(rng):
    """R1 of a small conv discriminator differentiated w.r.t. its weights."""
    images = rng.uniform(-1.0, 1.0, (2, 4, 4, 3))

    def fn(conv_w, conv_b, head_w, head_b):
        weights = WeightSet({'d.conv.0.weight': conv_w, 'd.conv.0.bias': conv_b,
                             'd.head.weight': head_w, 'd.head.bias': head_b})
        return r1_penalty(Discriminator('d', [2], 4, weights), images)
    return _report(gradcheck(fn, [rng.standard_normal((2, 3, 3, 3)), rng.standard_normal(2),
                                  rng.standard_normal((8, 1)), rng.standard_normal(1)], samples=10, rng=rng,
                             eps=1e-5))


@check('oracle')
def cube_hierarchy(rng):
    hierarchy = Shape.from_mesh(make_cube(), 3).hierarchy
    counts = hierarchy.face_counts()
    euler = [mesh.euler_characteristic() for mesh in hierarchy]
    return list(counts) == [6, 24, 96] and euler == [2, 2, 2], 'faces {0}, euler {1}'.format(counts, euler)


@check('oracle')
def gan_closed_forms(rng):
    d_loss, g_loss = gan_losses(np.zeros(4), np.zeros(4))
    error = max(abs(float(d_loss.data) - 2 * math.log(2)), abs(float(g_loss.data) - math.log(2)))
    return error < 1e-6, 'max error {:.1e}'.format(error)


@check('oracle')
def r1_linear(rng):
    size = 4
    weights = WeightSet()
    disc = Discriminator('lin', [], size, weights, rng)
    with diff.precision('float64'):
        penalty = float(r1_penalty(disc, rng.uniform(-1.0, 1.0, (3, size, size, 3))).data)
    expected = float(np.sum(weights['lin.head.weight'].data.astype(np.float64) ** 2))
    error = abs(penalty - expected) / expected
    return error < 1e-5, 'rel. error {:.1e}'.format(error)


@check('oracle')
def r1_input_gradient(rng):
    """The input-gradient graph agrees with central differences of sum(D(x))."""
    weights = WeightSet()
    disc = Discriminator('d', [3], 4, weights, rng)
    images = rng.uniform(-1.0, 1.0, (1, 4, 4, 3))
    with diff.precision('float64'):
        analytic = disc.input_gradient(images).data.transpose(0, 2, 3, 1).reshape(-1)
        numeric = np.zeros_like(analytic)
        eps = 1e-5
        for i in range(images.size):
            bumped = [images.copy(), images.copy()]
            bumped[0].reshape(-1)[i] += eps
            bumped[1].reshape(-1)[i] -= eps
            with diff.no_grad():
                numeric[i] = (float(diff.tsum(disc(bumped[0])).data) - float(diff.tsum(disc(bumped[1])).data)) / (
                    2 * eps)
    norms = float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric))
    error = abs(norms[0] - norms[1]) / max(norms[1], 1e-12)
    return error < 1e-4, 'norm {0:.4f} vs {1:.4f}'.format(*norms)


@check('oracle')
def path_length_constant(rng):
    state = PathLengthState(ema=0.5)
    result = path_length_reg(lambda w: diff.as_tensor(np.ones((2, 2, 3))) + w * 0.0, [np.ones(3)], state, rng)
    expected = (0.0 - state.ema) ** 2
    return abs(result.penalty - expected) < 1e-9, 'penalty {0:.4f}, expected {1:.4f}'.format(result.penalty,
                                                                                        expected)


@check('oracle')
def adam_quadratic(rng):
    x = diff.Tensor(rng.standard_normal(4), requires_grad=True)
    optimizer = diff.Adam([x], lr=0.1)
    for _ in range(300):
        optimizer.zero_grad()
        diff.backward(diff.tsum((x - 3.0) ** 2))
        optimizer.step()
    error = float(np.abs(x.data - 3.0).max())
    return error < 1e-2, 'max |x - 3| {:.1e}'.format(error)


def run_selftest(suites=SUITES, seed=0):
    results = []
    for suite, name, fn in _CHECKS:
        if suite not in suites:
            continue
        started = time.monotonic()
        try:
            ok, detail = fn(np.random.default_rng(seed))
        except Exception as e:
            LOG.exception('Check %s.%s raised', suite, name)
            ok, detail = False, '{0}: {1}'.format(type(e).__name__, e)
        results.append(CheckResult(suite, name, bool(ok), detail, time.monotonic() - started))
        LOG.debug('%s', results[-1])
    return results


def format_table(results):
    width = max([len(r.suite) + len(r.name) + 1 for r in results] + [5])
    lines = ['{0:<{1}}  {2:<4}  {3}'.format('check', width, 'ok', 'detail')]
    for r in results:
        lines.append('{0:<{1}}  {2:<4}  {3} ({4:.2f}s)'.format(
            '{0}.{1}'.format(r.suite, r.name), width, 'PASS' if r.ok else 'FAIL', r.detail, r.seconds))
    passed = sum(r.ok for r in results)
    lines.append('{0}/{1} passed'.format(passed, len(results)))
    return '\n'.join(lines)
