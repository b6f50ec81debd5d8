"""
Artifact storage: atomic writes and the manifest + raw-f32 container.
"""

from .atomic import atomic_write_bytes, atomic_write_text, atomic_directory
from .container import write_container, read_container, read_manifest

__all__ = [
    'atomic_write_bytes',
    'atomic_write_text',
    'atomic_directory',
    'write_container',
    'read_container',
    'read_manifest',
]
