"""
Command-line surface: argument parsing, subcommands, file artifacts,
figures and sensitivity sweeps.
"""

from .app import build_parser, main, run

__all__ = [
    'build_parser',
    'main',
    'run',
]
