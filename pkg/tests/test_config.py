import json
import math
import os

import pytest

import quadtex


def write_config(tmp_path, document):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps(document))
    return str(path)


def test_defaults():
    config = quadtex.Config()
    assert config.model.levels == 3
    assert config.transfer.phase1_iters == 100
    assert config.transfer.phase2_iters == 300
    assert config.train.lrs == quadtex.LR_PRESETS['photoshape']
    assert config.render.fov == pytest.approx(math.radians(40.0))
    assert set(config) == {'model', 'render', 'perceptual', 'transfer', 'train', 'corpus'}


def test_unknown_section():
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config({'scheduler': {}})


def test_unknown_key():
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config({'transfer': {'phase3_iters': 10}})


def test_partial_override(tmp_path):
    config = quadtex.Config.from_file(write_config(tmp_path, {'transfer': {'lr': 0.05}}))
    assert config.transfer.lr == 0.05
    assert config.transfer.phase2_iters == 300
    assert json.loads(config.dump())['transfer']['lr'] == 0.05


def test_relative_paths(tmp_path):
    config = quadtex.Config.from_file(write_config(tmp_path, {
        'perceptual': {'extractor_path': 'nets/vgg.m2tw'},
        'corpus': {'corpus_dir': '/data/corpus'},
    }))
    assert config['perceptual']['extractor_path'] == os.path.join(str(tmp_path), 'nets', 'vgg.m2tw')
    assert config['corpus']['corpus_dir'] == '/data/corpus'


def test_invalid_json(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text('{"model": ')
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config.from_file(str(path))


def test_presets():
    compcars = quadtex.Config({'train': {'preset': 'compcars'}}).train
    assert compcars.lr_field == 5e-4
    assert compcars.lr_discriminator == 1e-4
    override = quadtex.Config({'train': {'lr_generator': 3e-3}}).train
    assert override.lrs == (1e-4, 3e-3, 1e-4, 14e-4)
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config({'train': {'preset': 'shapenet'}})


def test_learning_rates_positive():
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config({'train': {'lr_field': 0.0}})
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config({'transfer': {'lr': -1.0}})


def test_validation():
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config({'transfer': {'pose_mode': 'guess'}})
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config({'model': {'levels': 2}})
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config({'perceptual': {'tap_layers': [1, 2, 3]}})
    with pytest.raises(quadtex.ConfigError):
        quadtex.Config({'render': {'fov_degrees': 180.0}})


def test_total_iters():
    assert quadtex.Config().transfer.total_iters == 400
    config = quadtex.Config({'transfer': {'refine_surface_features': False}})
    assert config.transfer.total_iters == 100


def test_model_config_round_trip(tiny_config):
    assert quadtex.ModelConfig(**tiny_config.to_dict()) == tiny_config
    assert tiny_config.feature_channels == 8


def test_config_save(tmp_path):
    path = str(tmp_path / 'saved.json')
    quadtex.Config({'train': {'iters': 5}}).save(path)
    assert quadtex.Config.from_file(path).train.iters == 5
