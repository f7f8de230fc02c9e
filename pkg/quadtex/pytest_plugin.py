import asyncio
import contextlib
import gc
import inspect

import numpy as np
import pytest

from .config import ModelConfig
from .corpus import make_shape
from .model import TextureModel
from .perceptual import build_tiny_extractor


def pytest_addoption(parser):
    parser.addoption(
        '--fast', action='store_true', default=False,
        help='run tests faster by disabling extra checks')
    parser.addoption(
        '--runslow', action='store_true', default=False,
        help='also run the desk-scale acceptance runs')
    parser.addoption(
        '--enable-loop-debug', action='store_true', default=False,
        help='enable event loop debug mode')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale run, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@contextlib.contextmanager
def loop_context(loop_factory=asyncio.new_event_loop, fast=False):
    """A contextmanager that creates an event_loop, for test purposes.

    Handles the creation and cleanup of a test loop.
    """
    loop = setup_test_loop(loop_factory)
    yield loop
    teardown_test_loop(loop, fast=fast)


def setup_test_loop(loop_factory=asyncio.new_event_loop):
    loop = loop_factory()
    asyncio.set_event_loop(loop)
    return loop


def teardown_test_loop(loop, fast=False):
    if not loop.is_closed():
        loop.call_soon(loop.stop)
        loop.run_forever()
        loop.close()
    if not fast:
        gc.collect()
    asyncio.set_event_loop(None)


def pytest_pycollect_makeitem(collector, name, obj):
    """Fix pytest collecting for coroutines."""
    if collector.funcnamefilter(name) and inspect.iscoroutinefunction(obj):
        return list(collector._genfunctions(name, obj))


def pytest_pyfunc_call(pyfuncitem):
    """Run coroutines in an event loop instead of a normal function call."""
    if inspect.iscoroutinefunction(pyfuncitem.function):
        testargs = {arg: pyfuncitem.funcargs[arg]
                    for arg in pyfuncitem._fixtureinfo.argnames}
        _loop = pyfuncitem.funcargs['loop']
        _loop.run_until_complete(_loop.create_task(pyfuncitem.obj(**testargs)))
        return True


@pytest.fixture
def loop(request):
    """Return an instance of the event loop."""
    fast = request.config.getoption('--fast')
    debug = request.config.getoption('--enable-loop-debug')

    with loop_context(fast=fast) as _loop:
        if debug:
            _loop.set_debug(True)  # pragma: no cover
        yield _loop


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return ModelConfig(levels=2, enc_channels=[4, 8], dec_channels=[8, 8], z_dim=8, w_dim=8, mapping_layers=2,
                       aux_dim=8, field_width=16, field_trunk=2, seed=7)


@pytest.fixture
def tiny_model(tiny_config):
    return TextureModel.create(tiny_config)


@pytest.fixture(scope='session')
def tiny_extractor():
    return build_tiny_extractor()


@pytest.fixture(scope='session')
def cube_shape():
    """Two-level cube hierarchy: 6 and 24 faces."""
    return make_shape('cube', 2)


@pytest.fixture(scope='session')
def cube_shape3():
    return make_shape('cube', 3)
