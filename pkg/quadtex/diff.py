"""
Reverse-mode automatic differentiation over dense numpy arrays.

Every primitive computes its forward value eagerly and, when one of its inputs
requires a gradient, keeps a closure mapping the output gradient to the input
gradients. ``backward`` records the graph reachable from a scalar loss into a
:class:`Tape` (topological order), runs it in reverse and releases it.
"""
import contextlib
import contextvars
import logging

import numpy as np

from .exceptions import BackwardError, ShapeMismatch

__all__ = ['Tensor', 'Tape', 'as_tensor', 'to_numpy', 'precision', 'no_grad', 'default_dtype',
           'backward', 'grad',
           'add', 'sub', 'mul', 'div', 'neg', 'power', 'matmul', 'conv2d',
           'relu', 'leaky_relu', 'tanh', 'sigmoid', 'exp', 'log', 'softplus',
           'tsum', 'mean', 'reshape', 'transpose', 'getitem', 'take', 'index_add',
           'concat', 'stack', 'upsample2x', 'avgpool2x', 'gram',
           'AdamState', 'adam_step', 'Adam']


LOG = logging.getLogger(__name__)

_DTYPE = contextvars.ContextVar('quadtex_dtype', default=np.float32)
_GRAD_ENABLED = contextvars.ContextVar('quadtex_grad_enabled', default=True)


@contextlib.contextmanager
def precision(dtype):
    """Create new tensors with ``dtype`` inside the block (float32 outside)."""
    token = _DTYPE.set(np.dtype(dtype).type)
    try:
        yield
    finally:
        _DTYPE.reset(token)


@contextlib.contextmanager
def no_grad():
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def default_dtype():
    return _DTYPE.get()


class Tensor:
    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=_DTYPE.get())
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None
        self._op = None

    @classmethod
    def _result(cls, data, parents, backward, op):
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=_DTYPE.get())
        out.grad = None
        out.name = None
        out._op = op
        out.requires_grad = _GRAD_ENABLED.get() and any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self._backward is None

    @property
    def T(self):
        return transpose(self)

    def __len__(self):
        return self.data.shape[0]

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float('nan')

    def detach(self):
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.requires_grad = False
        out.grad = None
        out.name = self.name
        out._parents = ()
        out._backward = None
        out._op = None
        return out

    def zero_grad(self):
        self.grad = None

    def backward(self, retain_graph=False):
        backward(self, retain_graph=retain_graph)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def __repr__(self):
        return '<Tensor shape={0} requires_grad={1} op={2} name={3}>'.format(
            self.shape, self.requires_grad, self._op, self.name)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(value, dtype=_DTYPE.get())
    out.requires_grad = False
    out.grad = None
    out.name = None
    out._parents = ()
    out._backward = None
    out._op = None
    return out


def to_numpy(value):
    """The array behind a tensor, or ``value`` as an array."""
    return value.data if isinstance(value, Tensor) else np.asarray(value)


class Tape:
    """Operations reachable from one output, parents before children."""

    def __init__(self, nodes):
        self.nodes = nodes

    @classmethod
    def record(cls, output):
        order = []
        seen = set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def propagate(self, output, seed, keep=()):
        grads = {id(output): seed}
        keep = set(keep)
        for node in reversed(self.nodes):
            if node._backward is None:
                continue
            if id(node) in keep:
                g = grads.get(id(node))
            else:
                g = grads.pop(id(node), None)
            if g is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        return grads

    def consume(self):
        for node in self.nodes:
            node._parents = ()
            node._backward = None
        self.nodes = []


def _check_scalar(output):
    if not isinstance(output, Tensor) or output.data.size != 1:
        raise BackwardError('backward needs a scalar output, got shape {}'.format(
            getattr(output, 'shape', None)))


def backward(loss, retain_graph=False):
    _check_scalar(loss)
    if not loss.requires_grad:
        LOG.debug('backward on a constant: nothing to do')
        return
    tape = Tape.record(loss)
    grads = tape.propagate(loss, np.ones_like(loss.data))
    for node in tape:
        if node._backward is None and node.requires_grad and id(node) in grads:
            g = np.asarray(grads[id(node)], dtype=node.data.dtype).reshape(node.shape)
            node.grad = g if node.grad is None else node.grad + g
    LOG.log(5, 'backward through %d recorded operations', len(tape))
    if not retain_graph:
        tape.consume()


def grad(output, inputs, retain_graph=True):
    """First-order gradients of a scalar w.r.t. arbitrary tensors; ``.grad`` untouched."""
    _check_scalar(output)
    if not output.requires_grad:
        return [np.zeros_like(x.data) for x in inputs]
    tape = Tape.record(output)
    grads = tape.propagate(output, np.ones_like(output.data), keep=[id(x) for x in inputs])
    result = [np.asarray(grads[id(x)]).reshape(x.shape) if id(x) in grads else np.zeros_like(x.data)
              for x in inputs]
    if not retain_graph:
        tape.consume()
    return result


def _unbroadcast(g, shape):
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch('{0}: incompatible shapes {1} and {2}'.format(op, a.shape, b.shape))


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'add')

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return Tensor._result(a.data + b.data, (a, b), _backward, 'add')


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'sub')

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return Tensor._result(a.data - b.data, (a, b), _backward, 'sub')


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'mul')

    def _backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return Tensor._result(a.data * b.data, (a, b), _backward, 'mul')


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'div')

    def _backward(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return Tensor._result(a.data / b.data, (a, b), _backward, 'div')


def neg(a):
    a = as_tensor(a)
    return Tensor._result(-a.data, (a,), lambda g: (-g,), 'neg')


def power(a, exponent):
    a = as_tensor(a)
    exponent = float(exponent)

    def _backward(g):
        return (g * exponent * np.power(a.data, exponent - 1.0),)
    return Tensor._result(np.power(a.data, exponent), (a,), _backward, 'pow')


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch('matmul: cannot multiply {0} by {1}'.format(a.shape, b.shape))

    def _backward(g):
        return g @ b.data.T, a.data.T @ g
    return Tensor._result(a.data @ b.data, (a, b), _backward, 'matmul')


def conv2d(x, weight, bias=None):
    """Stride-1 'same' convolution of NCHW ``x`` with an (O, C, k, k) kernel, k odd."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1] \
            or weight.shape[2] != weight.shape[3] or weight.shape[2] % 2 == 0:
        raise ShapeMismatch('conv2d: input {0} incompatible with kernel {1}'.format(x.shape, weight.shape))
    n, c, h, w = x.shape
    k = weight.shape[2]
    pad = k // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((n, h, w, weight.shape[0]), dtype=np.result_type(x.data, weight.data))
    for i in range(k):
        for j in range(k):
            out += np.tensordot(xp[:, :, i:i + h, j:j + w], weight.data[:, :, i, j], axes=([1], [1]))
    out = out.transpose(0, 3, 1, 2)
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data.reshape(1, -1, 1, 1)
        parents = (x, weight, bias)

    def _backward(g):
        gw = np.zeros_like(weight.data, dtype=g.dtype)
        gxp = np.zeros(xp.shape, dtype=g.dtype) if x.requires_grad else None
        for i in range(k):
            for j in range(k):
                if weight.requires_grad:
                    gw[:, :, i, j] = np.tensordot(g, xp[:, :, i:i + h, j:j + w], axes=([0, 2, 3], [0, 2, 3]))
                if gxp is not None:
                    gxp[:, :, i:i + h, j:j + w] += np.tensordot(
                        g, weight.data[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
        gx = gxp[:, :, pad:pad + h, pad:pad + w] if gxp is not None else None
        grads = (gx, gw)
        if bias is not None:
            grads += (g.sum(axis=(0, 2, 3)),)
        return grads
    return Tensor._result(out, parents, _backward, 'conv2d')


def relu(x):
    x = as_tensor(x)
    positive = x.data > 0
    return Tensor._result(np.where(positive, x.data, 0), (x,), lambda g: (g * positive,), 'relu')


def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    scale = np.where(x.data > 0, 1.0, slope).astype(x.data.dtype)
    return Tensor._result(x.data * scale, (x,), lambda g: (g * scale,), 'leaky_relu')


def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.data)
    return Tensor._result(y, (x,), lambda g: (g * (1.0 - y * y),), 'tanh')


def _sigmoid(v):
    return np.exp(-np.logaddexp(0.0, -v))


def sigmoid(x):
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return Tensor._result(y, (x,), lambda g: (g * y * (1.0 - y),), 'sigmoid')


def exp(x):
    x = as_tensor(x)
    y = np.exp(x.data)
    return Tensor._result(y, (x,), lambda g: (g * y,), 'exp')


def log(x):
    x = as_tensor(x)
    return Tensor._result(np.log(x.data), (x,), lambda g: (g / x.data,), 'log')


def softplus(x):
    x = as_tensor(x)
    return Tensor._result(np.logaddexp(0.0, x.data), (x,), lambda g: (g * _sigmoid(x.data),), 'softplus')


def _expand_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(np.asarray(g).reshape((1,) * len(shape)), shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(a % len(shape) for a in axes)
    if not keepdims:
        for a in sorted(axes):
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape)


def tsum(x, axis=None, keepdims=False):
    x = as_tensor(x)

    def _backward(g):
        return (np.array(_expand_reduced(g, x.shape, axis, keepdims)),)
    return Tensor._result(x.data.sum(axis=axis, keepdims=keepdims), (x,), _backward, 'sum')


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    count = x.data.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))

    def _backward(g):
        return (np.array(_expand_reduced(g, x.shape, axis, keepdims)) / count,)
    return Tensor._result(x.data.mean(axis=axis, keepdims=keepdims), (x,), _backward, 'mean')


def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeMismatch('reshape: cannot view {0} as {1}'.format(x.shape, shape))
    return Tensor._result(out, (x,), lambda g: (g.reshape(x.shape),), 'reshape')


def transpose(x, axes=None):
    x = as_tensor(x)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))
    return Tensor._result(x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),), 'transpose')


def _is_basic_index(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in items)


def getitem(x, index):
    x = as_tensor(x)
    basic = _is_basic_index(index)

    def _backward(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        if basic:
            gx[index] += g
        else:
            np.add.at(gx, index, g)
        return (gx,)
    return Tensor._result(x.data[index], (x,), _backward, 'getitem')


def take(x, indices):
    """Gather rows: ``out[...] = x[indices[...]]``; scatter-add backward."""
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= x.shape[0]):
        raise ShapeMismatch('take: index out of range for {} rows'.format(x.shape[0]))

    def _backward(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        np.add.at(gx, indices, g)
        return (gx,)
    return Tensor._result(np.take(x.data, indices, axis=0), (x,), _backward, 'take')


def index_add(src, indices, rows):
    """Scatter-add rows of ``src`` into a zero tensor with ``rows`` rows."""
    src = as_tensor(src)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.shape != src.shape[:indices.ndim]:
        raise ShapeMismatch('index_add: {0} indices for source {1}'.format(indices.shape, src.shape))
    out = np.zeros((rows,) + src.shape[indices.ndim:], dtype=src.data.dtype)
    np.add.at(out, indices, src.data)
    return Tensor._result(out, (src,), lambda g: (g[indices],), 'index_add')


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeMismatch('concat: incompatible shapes {}'.format([t.shape for t in tensors]))
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g):
        return tuple(np.split(g, bounds, axis=axis))
    return Tensor._result(out, tensors, _backward, 'concat')


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    expanded = [reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


def upsample2x(x):
    x = as_tensor(x)
    n, c, h, w = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)
    return Tensor._result(out, (x,), lambda g: (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),), 'upsample2x')


def avgpool2x(x):
    x = as_tensor(x)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch('avgpool2x: spatial size {} is not even'.format((h, w)))
    out = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def _backward(g):
        return (g.repeat(2, axis=2).repeat(2, axis=3) / 4.0,)
    return Tensor._result(out, (x,), _backward, 'avgpool2x')


def gram(features, normalizer=1.0):
    """Channel Gram matrix of a (C, N) feature matrix divided by ``normalizer``."""
    features = as_tensor(features)
    if features.ndim != 2:
        raise ShapeMismatch('gram: expected (channels, sites), got {}'.format(features.shape))
    normalizer = float(normalizer)
    f = features.data

    def _backward(g):
        return ((g + g.T) @ f / normalizer,)
    return Tensor._result(f @ f.T / normalizer, (features,), _backward, 'gram')


class AdamState:
    def __init__(self, shape, dtype=np.float32):
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)
        self.step = 0


def adam_step(param, grad, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; mutates ``state`` and returns the new parameter array."""
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.step)
    v_hat = state.v / (1.0 - beta2 ** state.step)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.state = [AdamState(p.shape, p.data.dtype) for p in self.params]

    def step(self):
        beta1, beta2 = self.betas
        for param, state in zip(self.params, self.state):
            if param.grad is None:
                continue
            param.data = adam_step(param.data, param.grad, state, self.lr,
                                   beta1, beta2, self.eps).astype(param.data.dtype)

    def zero_grad(self):
        for param in self.params:
            param.grad = None

    def __repr__(self):
        return '<Adam params={0} lr={1} betas={2}>'.format(len(self.params), self.lr, self.betas)
