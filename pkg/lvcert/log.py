"""Package logger.

All modules log through children of the ``lvcert`` logger. A single stderr
handler is attached on first use; ``LVCERT_DEBUG`` in the environment turns
on debug output.
"""

import logging
import os

_ROOT_NAME = "lvcert"
_configured = False


def _configure_root():
    global _configured
    root = logging.getLogger(_ROOT_NAME)
    if not _configured:
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)-8s %(name)s: %(message)s")
        )
        root.addHandler(handler)
        root.setLevel(logging.DEBUG if "LVCERT_DEBUG" in os.environ else logging.WARNING)
        root.propagate = False
        _configured = True
    return root


def get_logger(name=None):
    """Return the package logger or one of its children.

    Args:
        name (str | None): Dotted module name such as ``"lvcert.dde"``; the
            ``lvcert.`` prefix is optional.

    Returns:
        logging.Logger: Configured logger.
    """
    root = _configure_root()
    if not name or name == _ROOT_NAME:
        return root
    if name.startswith(_ROOT_NAME + "."):
        name = name[len(_ROOT_NAME) + 1 :]
    return root.getChild(name)


def set_verbosity(count):
    """Map a ``-v`` count onto the package log level (0 keeps the default)."""
    root = _configure_root()
    if count >= 2:
        root.setLevel(logging.DEBUG)
    elif count == 1:
        root.setLevel(logging.INFO)
