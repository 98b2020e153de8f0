"""Command-line interface"""

from sphs.ui.cli import main

__all__ = [
    'main',
]
