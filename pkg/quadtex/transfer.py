"""
Texture transfer from a single query image.

Phase 1 optimizes the texture code against the global and patch style losses
with every network weight frozen. Phase 2 freezes the code and refines the two
finest synthesis convolutions against the patch loss alone.
"""
import logging

import numpy as np
from tqdm import tqdm

from . import diff
from .config import RenderConfig, TransferConfig
from .exceptions import BackwardError, EmptyMask, MissingNOC, PoseError
from .generator import TextureLatent, synthesis_conv_names
from .perceptual import build_tiny_extractor, patch_style_loss, pyramid_features, total_style_loss
from .render import RenderedView, pose_from_bins, pose_to_bins, rasterize, render_noc, shade
from .utils import masked_rmse

__all__ = ['TransferResult', 'transfer', 'estimate_pose', 'refined_layer_names']


LOG = logging.getLogger(__name__)


class TransferResult:
    def __init__(self, latent, refined_weights, loss_trace, final_render, camera, initial_rmse, final_rmse,
                 phase1_iters=None):
        self.latent = latent
        self.refined_weights = refined_weights
        self.loss_trace = loss_trace
        self.final_render = final_render
        self.camera = camera
        self.initial_rmse = initial_rmse
        self.final_rmse = final_rmse
        self.phase1_iters = len(loss_trace) if phase1_iters is None else phase1_iters

    @property
    def phase1_trace(self):
        return self.loss_trace[:self.phase1_iters]

    def __repr__(self):
        return '<TransferResult iters={0} rmse={1:.4f}->{2:.4f}>'.format(
            len(self.loss_trace), self.initial_rmse, self.final_rmse)


def estimate_pose(mode, camera=None, bins=None, render_config=None, image_size=None):
    """Camera for the query: the true one, the true one snapped to bin centers, or user-given bins."""
    render_config = render_config or RenderConfig()
    if mode == 'exact':
        if camera is None:
            raise PoseError('exact pose mode needs the query camera')
        return camera if image_size is None else camera.with_size(image_size)
    if mode == 'bins':
        if camera is None:
            raise PoseError('bins pose mode needs the query camera')
        az_bin, el_bin = pose_to_bins(camera, render_config.elevation_range)
        return pose_from_bins(az_bin, el_bin, camera.distance, camera.fov, image_size or camera.image_size,
                              render_config.elevation_range)
    if mode == 'provided':
        if bins is None:
            raise PoseError('provided pose mode needs (azimuth bin, elevation bin)')
        return pose_from_bins(bins[0], bins[1], render_config.distance, render_config.fov,
                              image_size or render_config.transfer_image_size, render_config.elevation_range)
    raise PoseError('unknown pose mode {!r}'.format(mode))


def refined_layer_names(levels):
    return synthesis_conv_names(levels)[-2:]


def _check_gradient_support(weights, allowed, phase):
    leaked = [name for name, tensor in weights.items() if tensor.grad is not None and name not in allowed]
    if leaked:
        raise BackwardError('{0}: gradient reached frozen tensors {1}'.format(phase, leaked))


def transfer(query_rgb, query_mask, query_noc, shape, model, cfg=None, extractor=None, camera=None, bins=None,
             render_config=None, init_latent=None, noise_seed=None, progress=False):
    """
    Fit ``model`` to a query image on ``shape``. Mutates the refined layers of ``model.weights``
    in phase 2; every other tensor is left untouched and trainability flags are restored.
    """
    cfg = cfg or TransferConfig()
    spec = cfg.spec
    render_config = render_config or RenderConfig()
    extractor = extractor or build_tiny_extractor()
    query_rgb = np.asarray(query_rgb, dtype=np.float32)
    query_mask = np.asarray(query_mask, dtype=bool)
    if not query_mask.any():
        raise EmptyMask('query mask is empty')
    if spec.use_patch_loss and spec.noc_guidance and query_noc is None:
        raise MissingNOC('the patch loss needs the query object coordinates')

    camera = estimate_pose(cfg.pose_mode, camera, bins, render_config, image_size=query_rgb.shape[0])
    frag = rasterize(shape.mesh, camera)
    if not frag.mask.any():
        raise EmptyMask('the mesh is not visible from {}'.format(camera))
    render_mask = frag.mask
    noc = render_noc(frag, shape.mesh, render_config.noc_padding)
    rng = np.random.default_rng(cfg.seed)

    weights = model.weights
    trainable = set(weights.trainable())
    weights.freeze()
    try:
        with diff.no_grad():
            skips = model.generator.encode(shape)
        noise = model.generator.make_noise(shape.hierarchy, noise_seed)
        query_feats = pyramid_features(query_rgb, query_mask, extractor, spec.n_levels)

        if cfg.latent_space == 'w':
            start = init_latent.w if init_latent is not None and init_latent.w is not None else None
            if start is None and init_latent is not None:
                with diff.no_grad():
                    start = model.generator.mapping(init_latent.z)
            start = start.data if start is not None else model.mean_w(rng, cfg.latent_init_samples)
            code = diff.Tensor(start, requires_grad=True, name='latent.w')
        else:
            start = init_latent.z.data if init_latent is not None else rng.standard_normal(model.config.z_dim)
            code = diff.Tensor(start, requires_grad=True, name='latent.z')

        def style(code_tensor):
            return code_tensor if cfg.latent_space == 'w' else model.generator.mapping(code_tensor)

        def render(code_tensor):
            features, _ = model.generator.synthesize(style(code_tensor), skips, shape.hierarchy, noise)
            return shade(frag, features, model.field, shape.mesh)

        loss_trace = []
        initial_rmse = None

        LOG.info('Transfer phase 1: %d iterations on the %s code', cfg.phase1_iters, cfg.latent_space)
        optimizer = diff.Adam([code], lr=cfg.lr)
        for _ in tqdm(range(cfg.phase1_iters), desc='phase 1', disable=not progress):
            image = render(code)
            if initial_rmse is None:
                initial_rmse = masked_rmse(image.data, query_rgb, query_mask & render_mask)
            loss = total_style_loss(query_rgb, image, query_noc, noc, query_mask, render_mask, spec, rng, extractor,
                                    query_feats)
            optimizer.zero_grad()
            diff.backward(loss)
            _check_gradient_support(weights, (), 'phase 1')
            loss_trace.append(float(loss.data))
            optimizer.step()
        code.requires_grad = False

        refined = {}
        if cfg.refine_surface_features and cfg.phase2_iters:
            names = refined_layer_names(model.config.levels)
            weights.unfreeze(names)
            LOG.info('Transfer phase 2: %d iterations on %s', cfg.phase2_iters, ', '.join(names))
            optimizer = diff.Adam([weights[name] for name in names], lr=cfg.lr)
            for _ in tqdm(range(cfg.phase2_iters), desc='phase 2', disable=not progress):
                image = render(code)
                if initial_rmse is None:
                    initial_rmse = masked_rmse(image.data, query_rgb, query_mask & render_mask)
                if spec.use_patch_loss:
                    loss = spec.w_patch * patch_style_loss(query_rgb, image, query_noc, noc, query_mask, render_mask,
                                                           spec, rng, extractor)
                else:
                    loss = total_style_loss(query_rgb, image, query_noc, noc, query_mask, render_mask, spec, rng,
                                            extractor, query_feats, use_patch=False)
                optimizer.zero_grad()
                if loss.requires_grad:
                    diff.backward(loss)
                _check_gradient_support(weights, names, 'phase 2')
                loss_trace.append(float(loss.data))
                optimizer.step()
            optimizer.zero_grad()
            weights.freeze(names)
            refined = {name: weights[name].data.copy() for name in names}

        with diff.no_grad():
            final = render(code)
        final_rmse = masked_rmse(final.data, query_rgb, query_mask & render_mask)
        if initial_rmse is None:
            initial_rmse = final_rmse
    finally:
        weights.freeze()
        for name in trainable:
            weights[name].requires_grad = True

    with diff.no_grad():
        w = style(code) if cfg.latent_space == 'z' else code
    latent = TextureLatent(code.data if cfg.latent_space == 'z' else np.zeros(model.config.z_dim),
                           w=diff.as_tensor(w.data))
    view = RenderedView(final, render_mask, noc, frag, camera)
    result = TransferResult(latent, refined, loss_trace, view, camera, initial_rmse, final_rmse, cfg.phase1_iters)
    LOG.info('Transfer finished: %s', result)
    return result
