"""
Spectrogram construction and the data-preparation pipeline: STFT,
segment sampling, channel stacking, dataset assembly and archives.
"""

from .stft import (
    Spectrogram,
    StftConfig,
    frame_geometry,
    frames_per_segment,
    preprocessing_fingerprint,
    retained_bins,
    stft,
)
from .segments import SpectrogramSegment, sample_segments, stack_channels
from .dataset import (
    SPLIT_NAMES,
    BuildReport,
    DatasetPartition,
    LabeledDataset,
    assemble_dataset,
    split_sizes,
)
from .analysis import IntervalVariability, interval_variability, resolution_table, spectral_distance
from .archive import (
    archive_kind,
    load_dataset,
    load_segments,
    load_spectrogram,
    save_dataset,
    save_segments,
    save_spectrogram,
)

__all__ = [
    'SPLIT_NAMES',
    'BuildReport',
    'DatasetPartition',
    'IntervalVariability',
    'LabeledDataset',
    'Spectrogram',
    'SpectrogramSegment',
    'StftConfig',
    'archive_kind',
    'assemble_dataset',
    'frame_geometry',
    'frames_per_segment',
    'interval_variability',
    'load_dataset',
    'load_segments',
    'load_spectrogram',
    'preprocessing_fingerprint',
    'resolution_table',
    'retained_bins',
    'sample_segments',
    'save_dataset',
    'save_segments',
    'save_spectrogram',
    'spectral_distance',
    'split_sizes',
    'stack_channels',
    'stft',
]
