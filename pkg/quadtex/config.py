"""
Run configuration.

A configuration file is a JSON document with one object per section. Every
section starts from its ``DEFAULTS`` dict and only overrides what the file
states, so ``Config.dump()`` always describes a complete run.
"""
import json
import logging
import math
import os
from collections.abc import MutableMapping

from .exceptions import ConfigError

__all__ = ['Config', 'ModelConfig', 'StyleLossSpec', 'TransferConfig', 'TrainConfig', 'RenderConfig',
           'LR_PRESETS', 'POSE_MODES', 'LATENT_SPACES']


LOG = logging.getLogger(__name__)

MODEL_DEFAULTS = {
    'levels': 3,
    'enc_channels': [16, 32, 64],
    'dec_channels': [64, 64, 64],
    'z_dim': 512,
    'w_dim': 512,
    'mapping_layers': 8,
    'aux_dim': 512,
    'field_width': 128,
    'field_trunk': 4,
    'seed': 0,
}

RENDER_DEFAULTS = {
    'image_size': 256,
    'transfer_image_size': 512,
    'fov_degrees': 40.0,
    'distance': 2.5,
    'noc_padding': 0.05,
    'elevation_range': [0.0, 60.0],
    'threads': 4,
}

PERCEPTUAL_DEFAULTS = {
    'extractor_path': None,
    'extractor_seed': 0,
    'w_glob': 1.0,
    'w_patch': 1.0,
    'n_levels': 3,
    'n_patches': 2,
    'patch_size': 64,
    'min_patch_size': 16,
    'tap_layers': [2, 4, 8, 12, 16],
}

TRANSFER_DEFAULTS = {
    'phase1_iters': 100,
    'phase2_iters': 300,
    'lr': 1e-2,
    'pose_mode': 'exact',
    'latent_space': 'w',
    'latent_init_samples': 16,
    'use_patch_loss': True,
    'noc_guidance': True,
    'refine_surface_features': True,
    'seed': 0,
}

TRAIN_DEFAULTS = {
    'preset': 'photoshape',
    'lr_encoder': None,
    'lr_generator': None,
    'lr_field': None,
    'lr_discriminator': None,
    'betas': [0.0, 0.99],
    'batch': 2,
    'views_per_shape': 8,
    'image_size': 256,
    'disc_channels': [16, 32, 64, 64],
    'r1_weight': 5.0,
    'r1_interval': 16,
    'pl_weight': 2.0,
    'pl_interval': 8,
    'pl_decay': 0.01,
    'iters': 2000,
    'checkpoint_every': 100,
    'seed': 0,
}

CORPUS_DEFAULTS = {
    'corpus_dir': None,
    'size': 512,
    'image_size': 256,
    'levels': 3,
    'textures': ['stripes', 'checker', 'two_tone'],
    'shapes': ['cube', 'box', 'sphere'],
    'seed': 0,
}

DEFAULTS = {
    'model': MODEL_DEFAULTS,
    'render': RENDER_DEFAULTS,
    'perceptual': PERCEPTUAL_DEFAULTS,
    'transfer': TRANSFER_DEFAULTS,
    'train': TRAIN_DEFAULTS,
    'corpus': CORPUS_DEFAULTS,
}

# encoder, generator, field, discriminators
LR_PRESETS = {
    'photoshape': (1e-4, 12e-4, 1e-4, 14e-4),
    'compcars': (1e-4, 15e-4, 5e-4, 1e-4),
}

POSE_MODES = ('exact', 'bins', 'provided')
LATENT_SPACES = ('w', 'z')


class Config(MutableMapping):
    def __init__(self, sections=None, base_dir=None):
        self.base_dir = base_dir
        self._sections = {}
        sections = sections or {}
        unknown = set(sections) - set(DEFAULTS)
        if unknown:
            raise ConfigError('Unknown configuration section(s): {}'.format(', '.join(sorted(unknown))))
        for name, defaults in DEFAULTS.items():
            given = sections.get(name) or {}
            unknown = set(given) - set(defaults)
            if unknown:
                raise ConfigError('Unknown key(s) in [{0}]: {1}'.format(name, ', '.join(sorted(unknown))))
            self._sections[name] = self._resolve_paths({**defaults, **given})
        self._validate()

    @classmethod
    def from_file(cls, path):
        LOG.debug('Loading configuration: %s', path)
        try:
            with open(path) as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError('{0}: invalid JSON ({1})'.format(path, e))
        if not isinstance(document, dict):
            raise ConfigError('{}: top level must be an object'.format(path))
        return cls(document, base_dir=os.path.dirname(os.path.abspath(path)))

    def _resolve_paths(self, section):
        if self.base_dir is None:
            return section
        for key, value in section.items():
            if (key.endswith('_path') or key.endswith('_dir')) and value and not os.path.isabs(value):
                section[key] = os.path.normpath(os.path.join(self.base_dir, value))
        return section

    def _validate(self):
        train = self._sections['train']
        if train['preset'] not in LR_PRESETS:
            raise ConfigError('Unknown learning-rate preset: {}'.format(train['preset']))
        for lr in TrainConfig.from_section(train).lrs:
            if not lr > 0:
                raise ConfigError('Learning rates must be positive, got {}'.format(lr))
        TransferConfig.from_section(self._sections['transfer'], self._sections['perceptual'])
        ModelConfig.from_section(self._sections['model'])
        RenderConfig.from_section(self._sections['render'])

    def dump(self):
        return json.dumps(self._sections, indent=2, sort_keys=True)

    def save(self, path):
        with open(path, 'w') as f:
            f.write(self.dump())

    @property
    def model(self):
        return ModelConfig.from_section(self._sections['model'])

    @property
    def render(self):
        return RenderConfig.from_section(self._sections['render'])

    @property
    def style(self):
        return StyleLossSpec.from_section(self._sections['perceptual'])

    @property
    def transfer(self):
        return TransferConfig.from_section(self._sections['transfer'], self._sections['perceptual'])

    @property
    def train(self):
        return TrainConfig.from_section(self._sections['train'])

    # MutableMapping API
    def __eq__(self, other):
        return self is other

    def __getitem__(self, key):
        return self._sections[key]

    def __setitem__(self, key, value):
        if key not in DEFAULTS:
            raise ConfigError('Unknown configuration section: {}'.format(key))
        self._sections[key] = self._resolve_paths({**DEFAULTS[key], **value})

    def __delitem__(self, key):
        self._sections[key] = dict(DEFAULTS[key])

    def __len__(self):
        return len(self._sections)

    def __iter__(self):
        return iter(self._sections)

    def __repr__(self):
        return '<Config base_dir={}>'.format(self.base_dir)


def _check(condition, message, *args):
    if not condition:
        raise ConfigError(message.format(*args))


class ModelConfig:
    def __init__(self, *, levels=3, enc_channels=(16, 32, 64), dec_channels=(64, 64, 64), z_dim=512,
                 w_dim=512, mapping_layers=8, aux_dim=512, field_width=128, field_trunk=4, seed=0):
        self.levels = int(levels)
        self.enc_channels = [int(c) for c in enc_channels]
        self.dec_channels = [int(c) for c in dec_channels]
        self.z_dim = int(z_dim)
        self.w_dim = int(w_dim)
        self.mapping_layers = int(mapping_layers)
        self.aux_dim = int(aux_dim)
        self.field_width = int(field_width)
        self.field_trunk = int(field_trunk)
        self.seed = int(seed)
        _check(self.levels >= 1, 'model.levels must be >= 1, got {}', self.levels)
        _check(len(self.enc_channels) == self.levels and len(self.dec_channels) == self.levels,
               'model needs one encoder and one decoder width per level ({} levels)', self.levels)
        _check(self.mapping_layers >= 1, 'model.mapping_layers must be >= 1')
        _check(min(self.enc_channels + self.dec_channels + [self.z_dim, self.w_dim, self.aux_dim,
                                                             self.field_width]) > 0,
               'model widths must be positive')

    @property
    def feature_channels(self):
        return self.dec_channels[-1]

    @classmethod
    def from_section(cls, section):
        return cls(**{**MODEL_DEFAULTS, **section})

    def to_dict(self):
        return {
            'levels': self.levels,
            'enc_channels': list(self.enc_channels),
            'dec_channels': list(self.dec_channels),
            'z_dim': self.z_dim,
            'w_dim': self.w_dim,
            'mapping_layers': self.mapping_layers,
            'aux_dim': self.aux_dim,
            'field_width': self.field_width,
            'field_trunk': self.field_trunk,
            'seed': self.seed,
        }

    def __eq__(self, other):
        return isinstance(other, ModelConfig) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return '<ModelConfig {}>'.format(self.to_dict())


class RenderConfig:
    def __init__(self, *, image_size=256, transfer_image_size=512, fov_degrees=40.0, distance=2.5,
                 noc_padding=0.05, elevation_range=(0.0, 60.0), threads=4):
        self.image_size = int(image_size)
        self.transfer_image_size = int(transfer_image_size)
        self.fov = math.radians(float(fov_degrees))
        self.distance = float(distance)
        self.noc_padding = float(noc_padding)
        self.elevation_range = tuple(math.radians(float(e)) for e in elevation_range)
        self.threads = int(threads)
        _check(self.image_size > 0 and self.transfer_image_size > 0, 'render image sizes must be positive')
        _check(0 < self.fov < math.pi, 'render.fov_degrees must lie in (0, 180)')
        _check(self.distance > 0, 'render.distance must be positive')
        _check(self.noc_padding >= 0, 'render.noc_padding must be >= 0')
        _check(len(self.elevation_range) == 2 and self.elevation_range[0] < self.elevation_range[1],
               'render.elevation_range must be an increasing pair')
        _check(self.threads >= 1, 'render.threads must be >= 1')

    @classmethod
    def from_section(cls, section):
        return cls(**{**RENDER_DEFAULTS, **section})


class StyleLossSpec:
    def __init__(self, *, w_glob=1.0, w_patch=1.0, n_levels=3, n_patches=2, patch_size=64,
                 min_patch_size=16, tap_layers=(2, 4, 8, 12, 16), use_patch_loss=True, noc_guidance=True):
        self.w_glob = float(w_glob)
        self.w_patch = float(w_patch)
        self.n_levels = int(n_levels)
        self.n_patches = int(n_patches)
        self.patch_size = int(patch_size)
        self.min_patch_size = int(min_patch_size)
        self.tap_layers = tuple(int(t) for t in tap_layers)
        self.use_patch_loss = bool(use_patch_loss)
        self.noc_guidance = bool(noc_guidance)
        _check(self.n_levels >= 1, 'n_levels must be >= 1')
        _check(self.n_patches >= 0, 'n_patches must be >= 0')
        _check(self.patch_size % 2 == 0 and self.patch_size >= self.min_patch_size > 0,
               'patch_size must be even and >= min_patch_size, got {}', self.patch_size)
        _check(len(self.tap_layers) == 5, 'exactly 5 tap layers are required, got {}', len(self.tap_layers))

    @classmethod
    def from_section(cls, section, use_patch_loss=True, noc_guidance=True):
        section = {**PERCEPTUAL_DEFAULTS, **section}
        return cls(w_glob=section['w_glob'], w_patch=section['w_patch'], n_levels=section['n_levels'],
                   n_patches=section['n_patches'], patch_size=section['patch_size'],
                   min_patch_size=section['min_patch_size'], tap_layers=section['tap_layers'],
                   use_patch_loss=use_patch_loss, noc_guidance=noc_guidance)

    def __repr__(self):
        return '<StyleLossSpec w_glob={0} w_patch={1} levels={2} patches={3}x{4}>'.format(
            self.w_glob, self.w_patch, self.n_levels, self.n_patches, self.patch_size)


class TransferConfig:
    def __init__(self, *, phase1_iters=100, phase2_iters=300, lr=1e-2, pose_mode='exact', latent_space='w',
                 latent_init_samples=16, refine_surface_features=True, spec=None, seed=0):
        self.phase1_iters = int(phase1_iters)
        self.phase2_iters = int(phase2_iters)
        self.lr = float(lr)
        self.pose_mode = pose_mode
        self.latent_space = latent_space
        self.latent_init_samples = int(latent_init_samples)
        self.refine_surface_features = bool(refine_surface_features)
        self.spec = spec if spec is not None else StyleLossSpec()
        self.seed = int(seed)
        _check(self.phase1_iters >= 0 and self.phase2_iters >= 0, 'iteration counts must be >= 0')
        _check(self.lr > 0, 'transfer.lr must be positive, got {}', self.lr)
        _check(self.pose_mode in POSE_MODES, 'pose_mode must be one of {}', POSE_MODES)
        _check(self.latent_space in LATENT_SPACES, 'latent_space must be one of {}', LATENT_SPACES)
        _check(self.latent_init_samples >= 1, 'latent_init_samples must be >= 1')

    @property
    def total_iters(self):
        return self.phase1_iters + (self.phase2_iters if self.refine_surface_features else 0)

    @classmethod
    def from_section(cls, section, perceptual=None):
        section = {**TRANSFER_DEFAULTS, **section}
        spec = StyleLossSpec.from_section(perceptual or {}, use_patch_loss=section['use_patch_loss'],
                                          noc_guidance=section['noc_guidance'])
        return cls(phase1_iters=section['phase1_iters'], phase2_iters=section['phase2_iters'], lr=section['lr'],
                   pose_mode=section['pose_mode'], latent_space=section['latent_space'],
                   latent_init_samples=section['latent_init_samples'],
                   refine_surface_features=section['refine_surface_features'], spec=spec, seed=section['seed'])


class TrainConfig:
    def __init__(self, *, lrs=LR_PRESETS['photoshape'], betas=(0.0, 0.99), batch=2, views_per_shape=8,
                 image_size=256, disc_channels=(16, 32, 64, 64), r1_weight=5.0, r1_interval=16, pl_weight=2.0,
                 pl_interval=8, pl_decay=0.01, iters=2000, checkpoint_every=100, seed=0):
        self.lrs = tuple(float(lr) for lr in lrs)
        self.betas = tuple(float(b) for b in betas)
        self.batch = int(batch)
        self.views_per_shape = int(views_per_shape)
        self.image_size = int(image_size)
        self.disc_channels = [int(c) for c in disc_channels]
        self.r1_weight = float(r1_weight)
        self.r1_interval = int(r1_interval)
        self.pl_weight = float(pl_weight)
        self.pl_interval = int(pl_interval)
        self.pl_decay = float(pl_decay)
        self.iters = int(iters)
        self.checkpoint_every = int(checkpoint_every)
        self.seed = int(seed)
        _check(len(self.lrs) == 4, 'four learning rates are required (encoder, generator, field, discriminators)')
        _check(min(self.lrs) >= 0, 'learning rates must be >= 0')
        _check(self.batch >= 1 and self.views_per_shape >= 1, 'batch and views_per_shape must be >= 1')
        _check(self.r1_interval >= 1 and self.pl_interval >= 1, 'regularization intervals must be >= 1')
        _check(self.r1_weight >= 0 and self.pl_weight >= 0, 'regularization weights must be >= 0')

    @property
    def lr_encoder(self):
        return self.lrs[0]

    @property
    def lr_generator(self):
        return self.lrs[1]

    @property
    def lr_field(self):
        return self.lrs[2]

    @property
    def lr_discriminator(self):
        return self.lrs[3]

    @classmethod
    def from_section(cls, section):
        section = {**TRAIN_DEFAULTS, **section}
        if section['preset'] not in LR_PRESETS:
            raise ConfigError('Unknown learning-rate preset: {}'.format(section['preset']))
        preset = LR_PRESETS[section['preset']]
        lrs = tuple(preset[i] if section[key] is None else section[key]
                    for i, key in enumerate(('lr_encoder', 'lr_generator', 'lr_field', 'lr_discriminator')))
        return cls(lrs=lrs, betas=section['betas'], batch=section['batch'],
                   views_per_shape=section['views_per_shape'], image_size=section['image_size'],
                   disc_channels=section['disc_channels'], r1_weight=section['r1_weight'],
                   r1_interval=section['r1_interval'], pl_weight=section['pl_weight'],
                   pl_interval=section['pl_interval'], pl_decay=section['pl_decay'], iters=section['iters'],
                   checkpoint_every=section['checkpoint_every'], seed=section['seed'])
