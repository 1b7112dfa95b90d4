import logging
import sys
from typing import Optional

_FORMAT = '%(levelname)s %(name)s: %(message)s'
_handler: Optional[logging.StreamHandler] = None


def configure(level: str = 'INFO'):
    """Install the single stderr handler on the package root logger"""
    global _handler
    root = logging.getLogger('limclust')
    if _handler is None:
        _handler = logging.StreamHandler(sys.stderr)
        _handler.setFormatter(logging.Formatter(_FORMAT))
        root.addHandler(_handler)
        root.propagate = False
    else:
        # follow a replaced sys.stderr
        _handler.setStream(sys.stderr)
    root.setLevel(getattr(logging, str(level).upper(), logging.INFO))


def get_logger(name: str) -> logging.Logger:
    if not name.startswith('limclust'):
        name = f"limclust.{name.split('.')[-1]}"
    return logging.getLogger(name)
