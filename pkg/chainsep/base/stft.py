"""Short-time Fourier analysis and weighted overlap-add synthesis.

Both directions use the same square-root Hann window. The signal is
zero-padded by window_size - shift samples at both ends so every original
sample lies under a full set of overlapping frames and is reconstructed
exactly.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from chainsep.base.errors import SignalTooShort
from chainsep.base.signals import TimeSignal, StftConfig, MultichannelSpectrogram
from chainsep.seplogger.logger import logger


def analysis_window(config: StftConfig) -> np.ndarray:
    # periodic Hann, so that its square sums to a constant at every shift dividing the size
    return np.sqrt(get_window('hann', config.window_size, fftbins=True))


def _padding(config: StftConfig) -> int:
    return config.window_size - config.shift


def num_frames(num_samples: int, config: StftConfig) -> int:
    padded = num_samples + 2 * _padding(config)
    return 1 + int(np.ceil((padded - config.window_size) / config.shift))


def stft(signal: TimeSignal, config: StftConfig) -> MultichannelSpectrogram:
    """
    Multichannel STFT.

    Parameters:
        signal:
            Input with at least window_size samples.

        config:
            Window size and shift.

    Returns:
        Spectrogram of shape [window_size / 2 + 1, T, M].

    """
    n = config.window_size
    if signal.num_samples < n:
        msg = "Signal of {} samples is shorter than the STFT window ({})".format(signal.num_samples, n)
        logger.error(msg)
        raise SignalTooShort(msg)

    pad = _padding(config)
    frames_count = num_frames(signal.num_samples, config)
    total = (frames_count - 1) * config.shift + n
    padded = np.zeros((total, signal.num_channels))
    padded[pad:pad + signal.num_samples] = signal.samples

    # [T, M, N]
    frames = sliding_window_view(padded, n, axis=0)[::config.shift]
    spectrum = np.fft.rfft(frames * analysis_window(config), n=config.fft_size, axis=-1)
    return MultichannelSpectrogram(np.transpose(spectrum, (2, 0, 1)), config, signal.sample_rate)


def istft(spec: MultichannelSpectrogram, target_length: int) -> TimeSignal:
    """
    Inverse STFT by weighted overlap-add, trimmed (or zero-extended) to target_length samples.
    """
    config = spec.config
    n = config.window_size
    window = analysis_window(config)
    frames_count = spec.num_frames

    frames = np.fft.irfft(np.transpose(spec.data, (1, 2, 0)), n=config.fft_size, axis=-1) * window
    total = (frames_count - 1) * config.shift + n
    output = np.zeros((total, spec.num_channels))
    envelope = np.zeros(total)
    squared_window = window ** 2
    for t in range(frames_count):
        start = t * config.shift
        output[start:start + n] += frames[t].T
        envelope[start:start + n] += squared_window

    covered = envelope > 1e-12
    output[covered] /= envelope[covered, None]
    output[~covered] = 0.

    pad = _padding(config)
    trimmed = output[pad:pad + target_length]
    if trimmed.shape[0] < target_length:
        trimmed = np.concatenate([trimmed, np.zeros((target_length - trimmed.shape[0], spec.num_channels))])
    return TimeSignal(trimmed, spec.sample_rate)
