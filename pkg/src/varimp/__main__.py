"""Allow running the CLI as ``python -m varimp``."""

import sys

from .cli import entry

sys.exit(entry())
