""" chainsep base classes: signals, file formats, STFT, run configuration and the separation chain."""

from .signals import TimeSignal, StftConfig, MultichannelSpectrogram, SourceEstimates
from .chain import ChainConfig, SeparationChain
