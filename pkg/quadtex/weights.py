import logging
from collections.abc import MutableMapping

import numpy as np

from .diff import Tensor
from .exceptions import FormatError, ShapeMismatch
from .formats import read_m2tw, write_m2tw

__all__ = ['WeightSet', 'he_normal']


LOG = logging.getLogger(__name__)


def he_normal(rng, shape, fan_in, gain=np.sqrt(2.0)):
    return rng.standard_normal(shape) * (gain / np.sqrt(max(fan_in, 1)))


class WeightSet(MutableMapping):
    """Named trainable tensors. Every tensor requires grad unless frozen."""

    def __init__(self, tensors=None):
        self._tensors = {}
        for name, value in (tensors or {}).items():
            self[name] = value

    def add(self, name, value, requires_grad=True):
        if name in self._tensors:
            raise KeyError('duplicate weight name {!r}'.format(name))
        tensor = value if isinstance(value, Tensor) else Tensor(value, requires_grad=requires_grad, name=name)
        tensor.name = name
        self._tensors[name] = tensor
        return tensor

    def _select(self, names_or_prefix):
        if isinstance(names_or_prefix, str):
            names_or_prefix = [names_or_prefix]
        selected = []
        for key in names_or_prefix:
            matches = [name for name in self._tensors if name == key or name.startswith(key)]
            if not matches:
                raise KeyError('no weight matches {!r}'.format(key))
            selected.extend(matches)
        return selected

    def freeze(self, names_or_prefix=''):
        for name in self._select(names_or_prefix):
            self._tensors[name].requires_grad = False
            self._tensors[name].grad = None

    def unfreeze(self, names_or_prefix=''):
        for name in self._select(names_or_prefix):
            self._tensors[name].requires_grad = True

    def trainable(self):
        return [name for name, tensor in self._tensors.items() if tensor.requires_grad]

    def subset(self, prefix):
        return WeightSet({name: tensor for name, tensor in self._tensors.items() if name.startswith(prefix)})

    def zero_grad(self):
        for tensor in self._tensors.values():
            tensor.grad = None

    def state_dict(self):
        return {name: tensor.data.copy() for name, tensor in self._tensors.items()}

    def load_state_dict(self, state, strict=True):
        missing = set(self._tensors) - set(state)
        unexpected = set(state) - set(self._tensors)
        if strict and (missing or unexpected):
            raise FormatError('weights do not match: missing {0}, unexpected {1}'.format(
                sorted(missing), sorted(unexpected)))
        for name, array in state.items():
            if name not in self._tensors:
                continue
            tensor = self._tensors[name]
            if tuple(np.shape(array)) != tensor.shape:
                raise ShapeMismatch('{0}: stored shape {1} does not match {2}'.format(
                    name, np.shape(array), tensor.shape))
            tensor.data = np.array(array, dtype=tensor.data.dtype)

    def save(self, path, names=None):
        names = list(self._tensors) if names is None else list(names)
        write_m2tw(path, {name: self._tensors[name] for name in names})

    def load(self, path, strict=True):
        self.load_state_dict(read_m2tw(path), strict=strict)
        LOG.debug('Loaded %d tensors from %s', len(self), path)

    # MutableMapping API
    def __eq__(self, other):
        return self is other

    __hash__ = object.__hash__

    def __getitem__(self, name):
        return self._tensors[name]

    def __setitem__(self, name, value):
        tensor = value if isinstance(value, Tensor) else Tensor(value, requires_grad=True)
        tensor.name = name
        self._tensors[name] = tensor

    def __delitem__(self, name):
        del self._tensors[name]

    def __len__(self):
        return len(self._tensors)

    def __iter__(self):
        return iter(self._tensors)

    def __repr__(self):
        return '<WeightSet tensors={0} trainable={1}>'.format(len(self), len(self.trainable()))
