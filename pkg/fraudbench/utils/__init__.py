from . import config
from . import logging
from . import misc
