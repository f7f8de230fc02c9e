import json
import math
import os

import numpy as np
import pytest

import quadtex
from quadtex import cli, diff

CUBE_OBJ = """\
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v 0.5 0.5 0.5
v -0.5 0.5 0.5
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / 'cube.obj').write_text(CUBE_OBJ)
    config = {
        'model': {'levels': 2, 'enc_channels': [4, 8], 'dec_channels': [8, 8], 'z_dim': 8, 'w_dim': 8,
                  'mapping_layers': 2, 'aux_dim': 8, 'field_width': 16, 'field_trunk': 2},
        'render': {'image_size': 32, 'transfer_image_size': 32, 'distance': 3.0, 'threads': 1},
        'perceptual': {'n_levels': 1, 'n_patches': 1, 'patch_size': 16, 'min_patch_size': 8},
        'transfer': {'phase1_iters': 3, 'phase2_iters': 2, 'latent_init_samples': 2},
        'corpus': {'image_size': 16, 'levels': 1, 'shapes': ['cube']},
    }
    (tmp_path / 'config.json').write_text(json.dumps(config))
    return tmp_path


def run(workdir, *argv):
    return cli.main(['--config', str(workdir / 'config.json')] + [str(a) for a in argv])


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args([])
    args = cli.build_parser().parse_args(['selftest', '--suite', 'oracle'])
    assert args.suite == ['oracle'] and args.func is cli.cmd_selftest


def test_hierarchy(workdir, capsys):
    output = workdir / 'cube.qmh'
    assert run(workdir, 'hierarchy', workdir / 'cube.obj', '--levels', 3, '-o', output) == 0
    assert capsys.readouterr().out.split() == ['6', '24', '96']
    assert quadtex.read_qmh(str(output)).face_counts() == [6, 24, 96]


def test_generate_is_deterministic(workdir):
    weights = workdir / 'model.m2tw'
    assert run(workdir, 'init', '-o', weights) == 0
    assert os.path.exists(quadtex.sidecar_path(str(weights)))
    for name in ('a.png', 'b.png'):
        assert run(workdir, '--seed', 3, 'generate', '--weights', weights, '--mesh', workdir / 'cube.obj',
                   '--noise-seed', 1, '--azimuth', 30, '--elevation', 20, '-o', workdir / name) == 0
    a, b = quadtex.load_png(str(workdir / 'a.png')), quadtex.load_png(str(workdir / 'b.png'))
    assert a.shape == (32, 32, 3)
    assert np.array_equal(a, b)
    assert (a != -1.0).any()


def test_generate_without_pose_fails(workdir):
    weights = workdir / 'model.m2tw'
    run(workdir, 'init', '-o', weights)
    assert run(workdir, 'generate', '--weights', weights, '--mesh', workdir / 'cube.obj', '-o',
               workdir / 'out.png') == 1
    assert not (workdir / 'out.png').exists()


def test_missing_file_fails(workdir):
    assert run(workdir, 'hierarchy', workdir / 'absent.obj', '-o', workdir / 'x.qmh') == 1


def test_bad_config_fails(tmp_path):
    (tmp_path / 'config.json').write_text('{"model": {"depth": 3}}')
    assert run(tmp_path, 'selftest', '--suite', 'oracle') == 1


def test_render_noc(workdir):
    noc_path, mask_path = workdir / 'noc.png', workdir / 'mask.png'
    assert run(workdir, 'render-noc', '--mesh', workdir / 'cube.obj', '--azimuth', 30, '--elevation', 20,
               '--mask', mask_path, '-o', noc_path) == 0
    noc = quadtex.load_noc_png(str(noc_path))
    mask = quadtex.load_mask(str(mask_path))
    assert noc.shape == (32, 32, 3) and mask.shape == (32, 32)
    assert mask.any() and not mask.all()
    assert (noc[~mask] == 0).all()
    assert 0.0 <= noc[mask].min() and noc[mask].max() <= 1.0


def test_bake(workdir):
    weights = workdir / 'model.m2tw'
    run(workdir, 'init', '-o', weights)
    assert run(workdir, 'bake', '--weights', weights, '--mesh', workdir / 'cube.obj', '--resolution', 2,
               '-o', workdir / 'baked') == 0
    tiles = sorted(os.listdir(str(workdir / 'baked')))
    assert len(tiles) == 24
    assert quadtex.load_png(str(workdir / 'baked' / tiles[0])).shape == (2, 2, 3)


def test_selftest_exit_code(workdir, capsys):
    assert run(workdir, 'selftest', '--suite', 'oracle') == 0
    assert 'passed' in capsys.readouterr().out


def test_corpus(workdir):
    assert run(workdir, 'corpus', '--size', 2, '-o', workdir / 'corpus') == 0
    corpus = quadtex.load_corpus(str(workdir / 'corpus'))
    assert len(corpus) == 2 and corpus.image_size == 16


def test_transfer(workdir):
    weights = workdir / 'model.m2tw'
    run(workdir, 'init', '-o', weights)
    camera = ['--azimuth', 30, '--elevation', 20]
    run(workdir, 'generate', '--weights', weights, '--mesh', workdir / 'cube.obj', *camera, '-o', workdir / 'q.png')
    run(workdir, 'render-noc', '--mesh', workdir / 'cube.obj', *camera, '--mask', workdir / 'qmask.png',
        '-o', workdir / 'qnoc.png')
    out = workdir / 'transfer'
    assert run(workdir, 'transfer', '--weights', weights, '--mesh', workdir / 'cube.obj', '--query',
               workdir / 'q.png', '--mask', workdir / 'qmask.png', '--noc', workdir / 'qnoc.png', *camera,
               '-o', out) == 0
    with open(str(out / 'loss_trace.json')) as f:
        trace = json.load(f)
    assert len(trace['loss']) == 5 and trace['phase1_iters'] == 3
    deltas = quadtex.read_m2tw(str(out / 'refined_delta.m2tw'))
    assert sorted(deltas) == sorted(quadtex.refined_layer_names(2))
    assert np.load(str(out / 'latent_w.npy')).shape == (8,)
    assert quadtex.load_png(str(out / 'final.png')).shape == (32, 32, 3)


@pytest.mark.parametrize('with_weights', [True, False])
def test_render_noc_matches_model_render(workdir, with_weights):
    weights = workdir / 'model.m2tw'
    run(workdir, 'init', '-o', weights)
    noc_path, mask_path = workdir / 'noc.png', workdir / 'mask.png'
    extra = ['--weights', weights] if with_weights else []
    assert run(workdir, 'render-noc', '--mesh', workdir / 'cube.obj', *extra, '--azimuth', 30, '--elevation', 20,
               '--mask', mask_path, '-o', noc_path) == 0

    model = quadtex.TextureModel.load(str(weights))
    shape = cli._load_shape(str(workdir / 'cube.obj'), model.config.levels)
    fov = math.degrees(quadtex.RenderConfig().fov)
    camera = quadtex.Camera.from_degrees(30.0, 20.0, 3.0, fov, 32)
    with diff.no_grad():
        view = model.render(shape, model.sample_latent(0), camera, noc_padding=0.05)

    mask = quadtex.load_mask(str(mask_path))
    assert np.array_equal(mask, view.mask)
    noc = quadtex.load_noc_png(str(noc_path))
    assert np.allclose(noc[mask], view.noc[mask], atol=2.0 / 65535)


def test_failure_logs_traceback(workdir, caplog):
    assert run(workdir, 'hierarchy', workdir / 'absent.obj', '-o', workdir / 'x.qmh') == 1
    errors = [record for record in caplog.records if record.levelname == 'ERROR' and record.name == 'quadtex.cli']
    assert errors and errors[-1].exc_info is not None
