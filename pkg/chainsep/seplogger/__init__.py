from .logger import logger, set_verbosity
