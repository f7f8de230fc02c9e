# flake8: noqa: F401,F403

__author__ = 'quadtex developers'
__email__ = 'quadtex@users.noreply.github.com'
__version__ = '0.1.0'

from . import diff
from .exceptions import *
from .utils import *
from .config import *
from .geometry import *
from .formats import *
from .weights import *
from .generator import *
from .field import *
from .render import *
from .images import *
from .model import *
from .perceptual import *
from .transfer import *
from .gradcheck import *
from .corpus import *
from .gantrain import *
from .selftest import *
