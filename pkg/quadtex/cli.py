"""Command-line entry points."""
import argparse
import asyncio
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from tqdm import tqdm

from . import __version__, diff
from .config import Config
from .corpus import build_corpus, load_corpus, make_shape, save_corpus
from .exceptions import ConfigError, QuadtexException, TrainingDiverged
from .field import sample_face_grid, vertex_features
from .formats import read_qmh, write_m2tw, write_qmh
from .gantrain import Trainer
from .generator import TextureLatent
from .geometry import Shape, load_obj, subdivide
from .images import load_mask, load_noc_png, load_png, save_mask, save_noc_png, save_png
from .model import TextureModel
from .perceptual import build_tiny_extractor, load_extractor
from .render import Camera, rasterize, render_noc
from .selftest import SUITES, format_table, run_selftest
from .transfer import refined_layer_names, transfer

__all__ = ['main', 'build_parser']


LOG = logging.getLogger(__name__)


def _load_config(args):
    return Config.from_file(args.config) if args.config else Config()


def _load_shape(path, levels):
    if path.endswith('.qmh'):
        hierarchy = read_qmh(path)
        if len(hierarchy) != levels:
            raise ConfigError('{0} has {1} levels, the model expects {2}'.format(path, len(hierarchy), levels))
        return Shape(hierarchy, name=os.path.basename(path))
    return Shape.from_mesh(load_obj(path), levels, name=os.path.basename(path))


def _camera(args, render, image_size):
    if args.azimuth is None or args.elevation is None:
        return None
    return Camera.from_degrees(args.azimuth, args.elevation, render.distance, math.degrees(render.fov), image_size)


def _latent(args, model):
    if getattr(args, 'z_file', None):
        return TextureLatent(np.load(args.z_file))
    return model.sample_latent(args.seed)


def cmd_hierarchy(args, config):
    hierarchy = subdivide(load_obj(args.mesh), args.levels, smooth=not args.sharp)
    write_qmh(args.output, hierarchy)
    LOG.info('Wrote %s with face counts %s', args.output, hierarchy.face_counts())
    print(' '.join(str(count) for count in hierarchy.face_counts()))


def cmd_generate(args, config):
    model = TextureModel.load(args.weights)
    shape = _load_shape(args.mesh, model.config.levels)
    render = config.render
    camera = _camera(args, render, args.size or render.image_size)
    if camera is None:
        raise ConfigError('generate needs --azimuth and --elevation')
    view = model.render(shape, _latent(args, model), camera, noise_seed=args.noise_seed,
                        noc_padding=render.noc_padding, coarse=args.coarse)
    save_png(args.output, view.rgb.data)
    LOG.info('Rendered %s to %s', shape, args.output)


def cmd_bake(args, config):
    model = TextureModel.load(args.weights)
    shape = _load_shape(args.mesh, model.config.levels)
    features, _ = model.features(shape, _latent(args, model), args.noise_seed)
    vertex_feats = vertex_features(features, shape.mesh)
    os.makedirs(args.output, exist_ok=True)
    for face in tqdm(range(shape.mesh.n_faces), desc='bake', disable=not args.progress):
        tile = sample_face_grid(model.field, shape, vertex_feats, face, args.resolution)
        save_png(os.path.join(args.output, 'face_{:05d}.png'.format(face)), tile.data)
    LOG.info('Baked %d faces at %dpx into %s', shape.mesh.n_faces, args.resolution, args.output)


def cmd_transfer(args, config):
    model = TextureModel.load(args.weights)
    shape = _load_shape(args.mesh, model.config.levels)
    render = config.render
    query = load_png(args.query)
    mask = load_mask(args.mask, query.shape[0])
    noc = load_noc_png(args.noc) if args.noc else None
    cfg = config.transfer
    cfg.pose_mode = args.pose_mode or cfg.pose_mode
    path = config['perceptual']['extractor_path']
    extractor = load_extractor(path) if path else build_tiny_extractor(config['perceptual']['extractor_seed'])
    names = refined_layer_names(model.config.levels)
    before = {name: model.weights[name].data.copy() for name in names}
    with diff.precision('float64' if args.float64 else diff.default_dtype()):
        result = transfer(query, mask, noc, shape, model, cfg, extractor, camera=_camera(args, render, query.shape[0]),
                          bins=args.bins, render_config=render, noise_seed=args.noise_seed, progress=args.progress)
    os.makedirs(args.output, exist_ok=True)
    save_png(os.path.join(args.output, 'final.png'), result.final_render.rgb.data)
    with open(os.path.join(args.output, 'loss_trace.json'), 'w') as f:
        json.dump({'loss': result.loss_trace, 'phase1_iters': result.phase1_iters,
                   'initial_rmse': result.initial_rmse, 'final_rmse': result.final_rmse}, f, indent=2)
    write_m2tw(os.path.join(args.output, 'refined_delta.m2tw'),
               {name: result.refined_weights[name] - before[name] for name in result.refined_weights})
    np.save(os.path.join(args.output, 'latent_w.npy'), result.latent.w.data)
    LOG.info('Transfer written to %s (%s)', args.output, result)


def cmd_train(args, config):
    train = config.train
    if args.iters is not None:
        train.iters = args.iters
    corpus_dir = args.corpus or config['corpus']['corpus_dir']
    if not corpus_dir:
        raise ConfigError('train needs --corpus or corpus.corpus_dir')
    corpus = load_corpus(corpus_dir, train.image_size)
    model = TextureModel.create(config.model, args.seed)
    rng = np.random.default_rng(args.seed)
    shapes = [make_shape(name, model.config.levels, rng) for name in config['corpus']['shapes']]
    with ThreadPoolExecutor(args.threads or config.render.threads) as executor:
        trainer = Trainer(model, shapes, corpus.images, train, config.render, executor)
        try:
            asyncio.run(trainer.train(metrics_path=args.output + '.metrics.jsonl', checkpoint_path=args.output,
                                      progress=args.progress))
        except TrainingDiverged as e:
            with open(args.output + '.diverged.json', 'w') as f:
                json.dump(e.diagnostics, f, indent=2, default=str)
            raise
    LOG.info('Trained %s', trainer)


def cmd_render_noc(args, config):
    render = config.render
    camera = _camera(args, render, args.size or render.transfer_image_size)
    if camera is None:
        raise ConfigError('render-noc needs --azimuth and --elevation')
    if args.mesh.endswith('.qmh'):
        mesh = read_qmh(args.mesh).finest
    else:
        levels = TextureModel.load(args.weights).config.levels if args.weights else config.model.levels
        mesh = _load_shape(args.mesh, levels).mesh
    frag = rasterize(mesh, camera)
    save_noc_png(args.output, render_noc(frag, mesh, render.noc_padding))
    if args.mask:
        save_mask(args.mask, frag.mask)


def cmd_selftest(args, config):
    results = run_selftest(args.suite or SUITES, args.seed)
    print(format_table(results))
    return 0 if all(r.ok for r in results) else 1


def cmd_init(args, config):
    model = TextureModel.create(config.model, args.seed)
    model.save(args.output)


def cmd_corpus(args, config):
    section = config['corpus']
    output = args.output or section['corpus_dir']
    if not output:
        raise ConfigError('corpus needs -o or corpus.corpus_dir')
    corpus = build_corpus(args.size or section['size'], section['image_size'], section['textures'],
                          section['shapes'], section['levels'], args.seed, config.render, progress=args.progress)
    save_corpus(corpus, output)


def _add_camera(parser):
    parser.add_argument('--azimuth', type=float, help='degrees')
    parser.add_argument('--elevation', type=float, help='degrees')
    parser.add_argument('--size', type=int, help='image size in pixels')


def build_parser():
    parser = argparse.ArgumentParser(prog='quadtex', description='Textures on quad-mesh hierarchies.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('--config', help='JSON run configuration')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--threads', type=int, help='rasterization workers')
    parser.add_argument('--verbose', '-v', action='count', default=0)
    parser.add_argument('--progress', action='store_true', help='show progress bars')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('hierarchy', help='subdivide an OBJ into a QMH1 hierarchy')
    p.add_argument('mesh')
    p.add_argument('--levels', type=int, default=3)
    p.add_argument('--sharp', action='store_true', help='keep control positions instead of the limit surface')
    p.add_argument('-o', '--output', required=True)
    p.set_defaults(func=cmd_hierarchy)

    p = sub.add_parser('generate', help='render a generated texture')
    p.add_argument('--weights', required=True)
    p.add_argument('--mesh', required=True)
    p.add_argument('--z-file', help='.npy texture code; defaults to one drawn from --seed')
    p.add_argument('--noise-seed', type=int)
    p.add_argument('--coarse', action='store_true', help='render flat per-face colors')
    _add_camera(p)
    p.add_argument('-o', '--output', required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser('bake', help='sample every face on an n x n grid')
    p.add_argument('--weights', required=True)
    p.add_argument('--mesh', required=True)
    p.add_argument('--resolution', type=int, default=16)
    p.add_argument('--z-file')
    p.add_argument('--noise-seed', type=int)
    p.add_argument('-o', '--output', required=True)
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser('transfer', help='fit the texture of a query image')
    p.add_argument('--weights', required=True)
    p.add_argument('--mesh', required=True)
    p.add_argument('--query', required=True)
    p.add_argument('--mask', required=True)
    p.add_argument('--noc')
    p.add_argument('--pose-mode', choices=('exact', 'bins', 'provided'))
    p.add_argument('--bins', type=int, nargs=2, metavar=('AZIMUTH_BIN', 'ELEVATION_BIN'))
    p.add_argument('--noise-seed', type=int)
    p.add_argument('--float64', action='store_true')
    _add_camera(p)
    p.add_argument('-o', '--output', required=True)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser('train', help='toy adversarial training')
    p.add_argument('--corpus')
    p.add_argument('--iters', type=int)
    p.add_argument('-o', '--output', required=True, help='checkpoint path')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('render-noc', help='ground-truth object coordinates of a view')
    p.add_argument('--mesh', required=True)
    p.add_argument('--mask', help='also write the coverage mask here')
    p.add_argument('--weights', help='subdivide OBJ meshes to the level count of these weights')
    _add_camera(p)
    p.add_argument('-o', '--output', required=True)
    p.set_defaults(func=cmd_render_noc)

    p = sub.add_parser('selftest', help='finite-difference and oracle checks')
    p.add_argument('--suite', action='append', choices=SUITES)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser('init', help='write freshly initialised model weights')
    p.add_argument('-o', '--output', required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser('corpus', help='build the procedural training corpus')
    p.add_argument('--size', type=int)
    p.add_argument('-o', '--output')
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        config = _load_config(args)
        return args.func(args, config) or 0
    except QuadtexException as e:
        LOG.exception('%s: %s', type(e).__name__, e)
        return 1
    except OSError as e:
        LOG.exception('%s', e)
        return 1


if __name__ == '__main__':
    sys.exit(main())
