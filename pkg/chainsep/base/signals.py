import numpy as np

from chainsep.base.errors import ConfigError
from chainsep.seplogger.logger import logger


class TimeSignal:
    """Time-domain multichannel signal.

    Samples are stored as a real float64 matrix of shape
    [num_samples, num_channels]; the sample rate is metadata only.

    """
    def __init__(self, samples: np.ndarray, sample_rate: int):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] < 1:
            msg = "TimeSignal needs at least one sample and one channel, got shape {}".format(samples.shape)
            logger.error(msg)
            raise ValueError(msg)
        if not np.all(np.isfinite(samples)):
            msg = "TimeSignal samples must be finite."
            logger.error(msg)
            raise ValueError(msg)
        if int(sample_rate) != sample_rate or sample_rate <= 0:
            msg = "Sample rate must be a positive integer, got {}".format(sample_rate)
            logger.error(msg)
            raise ValueError(msg)
        self.samples = samples
        self.sample_rate = int(sample_rate)

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def num_channels(self) -> int:
        return self.samples.shape[1]

    def channel(self, m: int) -> 'TimeSignal':
        return TimeSignal(self.samples[:, m], self.sample_rate)

    def __repr__(self):
        return "TimeSignal({}x{}, {} Hz)".format(self.num_samples, self.num_channels, self.sample_rate)


class StftConfig:
    """Square-root Hann STFT setup.

    Parameters:
        window_size:
            Frame length in samples, a power of two. The FFT size equals the window size.

        shift:
            Frame advance in samples, at most half the window; defaults to a quarter of the window.

    """
    WINDOWS = ['sqrt_hann']

    def __init__(self, window_size: int = 1024, shift: int = None, window: str = 'sqrt_hann'):
        if shift is None:
            shift = window_size // 4
        window_size, shift = int(window_size), int(shift)
        if window_size < 2 or window_size & (window_size - 1):
            msg = "STFT window size must be a power of two, got {}".format(window_size)
            logger.error(msg)
            raise ConfigError(msg)
        if not 0 < shift <= window_size or window_size % shift:
            msg = "STFT shift must divide the window size, got shift={} for size={}".format(shift, window_size)
            logger.error(msg)
            raise ConfigError(msg)
        # squared sqrt-Hann frames only add up to a constant for at least two-fold overlap
        if shift > window_size // 2:
            msg = "STFT shift {} exceeds half the window size {}; overlap-add would not reconstruct" \
                .format(shift, window_size)
            logger.error(msg)
            raise ConfigError(msg)
        if window not in StftConfig.WINDOWS:
            msg = "Unsupported window '{}'".format(window)
            logger.error(msg)
            raise ConfigError(msg)
        self.window_size = window_size
        self.shift = shift
        self.window = window

    @property
    def fft_size(self) -> int:
        return self.window_size

    @property
    def num_bins(self) -> int:
        return self.window_size // 2 + 1

    def to_dict(self) -> dict:
        return {'window_size': self.window_size, 'shift': self.shift, 'window': self.window}

    def __eq__(self, other):
        return isinstance(other, StftConfig) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return "StftConfig(window_size={}, shift={})".format(self.window_size, self.shift)


class MultichannelSpectrogram:
    """Complex STFT tensor of shape [F, T, M] together with the config that produced it.

    The sample rate of the analysed signal travels along so that synthesis can restore it;
    8 kHz is assumed for tensors built without one.

    """
    def __init__(self, data: np.ndarray, config: StftConfig, sample_rate: int = 8000):
        data = np.asarray(data, dtype=np.complex128)
        if data.ndim != 3 or min(data.shape) < 1:
            msg = "Spectrogram data must have shape [F, T, M] with all dimensions >= 1, got {}".format(data.shape)
            logger.error(msg)
            raise ValueError(msg)
        if data.shape[0] != config.num_bins:
            msg = "Spectrogram has {} bins but its config implies {}".format(data.shape[0], config.num_bins)
            logger.error(msg)
            raise ValueError(msg)
        if not np.all(np.isfinite(data)):
            msg = "Spectrogram entries must be finite."
            logger.error(msg)
            raise ValueError(msg)
        self.data = data
        self.config = config
        self.sample_rate = int(sample_rate)

    @property
    def shape(self):
        return self.data.shape

    @property
    def num_bins(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def num_channels(self) -> int:
        return self.data.shape[2]


class SourceEstimates(MultichannelSpectrogram):
    """Separated sources d_hat in the STFT domain, shape [F, T, K]."""

    @property
    def num_sources(self) -> int:
        return self.data.shape[2]
