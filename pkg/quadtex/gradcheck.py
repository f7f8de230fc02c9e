import logging

import numpy as np

from . import diff

__all__ = ['gradcheck', 'GradcheckReport', 'numeric_gradient']


LOG = logging.getLogger(__name__)


class GradcheckReport:
    def __init__(self, errors, analytic, numeric, tolerance):
        self.errors = errors
        self.analytic = analytic
        self.numeric = numeric
        self.tolerance = tolerance

    @property
    def max_error(self):
        return max((float(np.max(e)) for e in self.errors if np.size(e)), default=0.0)

    @property
    def ok(self):
        return self.max_error <= self.tolerance

    def __bool__(self):
        return self.ok

    def __repr__(self):
        return '<GradcheckReport max_error={0:.2e} tolerance={1:.0e} ok={2}>'.format(
            self.max_error, self.tolerance, self.ok)


def numeric_gradient(fn, inputs, index, positions, eps):
    """Central differences of scalar ``fn`` for the flat ``positions`` of ``inputs[index]``."""
    values = []
    base = inputs[index]
    for position in positions:
        shifted = []
        for sign in (1.0, -1.0):
            bumped = base.copy()
            bumped.reshape(-1)[position] += sign * eps
            args = list(inputs)
            args[index] = bumped
            with diff.no_grad():
                shifted.append(float(np.sum(fn(*[diff.as_tensor(a) for a in args]).data)))
        values.append((shifted[0] - shifted[1]) / (2.0 * eps))
    return np.array(values)


def gradcheck(fn, inputs, eps=1e-3, tolerance=1e-3, samples=None, rng=None, floor=1e-6):
    """
    Compare reverse-mode gradients of scalar ``fn(*tensors)`` with central differences, in 64-bit.

    ``samples`` limits the checked entries per input to a random subset. The error of an
    entry is ``|a - n| / max(|a|, |n|, floor)``.
    """
    rng = rng or np.random.default_rng(0)
    with diff.precision('float64'):
        arrays = [np.array(x, dtype=np.float64) for x in inputs]
        tensors = [diff.Tensor(x, requires_grad=True) for x in arrays]
        diff.backward(fn(*tensors))
        errors, analytic_all, numeric_all = [], [], []
        for index, tensor in enumerate(tensors):
            size = arrays[index].size
            positions = np.arange(size) if samples is None or samples >= size else \
                rng.choice(size, samples, replace=False)
            analytic = (tensor.grad if tensor.grad is not None else np.zeros_like(arrays[index])).reshape(-1)
            analytic = analytic[positions]
            numeric = numeric_gradient(fn, arrays, index, positions, eps)
            scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
            errors.append(np.abs(analytic - numeric) / scale)
            analytic_all.append(analytic)
            numeric_all.append(numeric)
    report = GradcheckReport(errors, analytic_all, numeric_all, tolerance)
    LOG.debug('Gradcheck: %s', report)
    return report
