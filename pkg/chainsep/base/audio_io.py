"""WAV file boundary of the toolkit.

Integer PCM is normalized by 2^(bits-1) on read, float data passes through
unchanged. No resampling happens anywhere; the sample rate is carried along.
"""
import os

import numpy as np
import soundfile as sf

from chainsep.base.errors import UnsupportedFormat, CorruptHeader, IoFailure
from chainsep.base.signals import TimeSignal
from chainsep.seplogger.logger import logger

SUPPORTED_SUBTYPES = ('PCM_16', 'PCM_24', 'PCM_32', 'FLOAT')
WAV_CONTAINERS = ('WAV', 'WAVEX')
WRITE_FORMATS = {'float32': 'FLOAT', 'pcm16': 'PCM_16'}

_SOUNDFILE_ERRORS = (RuntimeError, getattr(sf, 'SoundFileError', RuntimeError))


def read_wav(path: str) -> TimeSignal:
    """
    Read a RIFF/WAVE file into a TimeSignal.

    Parameters:
        path:
            Location of a PCM16 / PCM24 / PCM32 / float32 WAV file with any channel count.

    Returns:
        TimeSignal with samples of shape [num_samples, num_channels].

    """
    if not os.path.isfile(path):
        msg = "Cannot read '{}': no such file.".format(path)
        logger.error(msg)
        raise IoFailure(msg)
    try:
        info = sf.info(path)
    except _SOUNDFILE_ERRORS as e:
        msg = "Cannot parse WAV header of '{}': {}".format(path, e)
        logger.error(msg)
        raise CorruptHeader(msg) from e
    except OSError as e:
        msg = "Cannot read '{}': {}".format(path, e)
        logger.error(msg)
        raise IoFailure(msg) from e

    if info.format not in WAV_CONTAINERS or info.subtype not in SUPPORTED_SUBTYPES:
        msg = "Unsupported audio format {}/{} in '{}'; expected WAV with one of {}".format(
            info.format, info.subtype, path, SUPPORTED_SUBTYPES)
        logger.error(msg)
        raise UnsupportedFormat(msg)

    try:
        samples, sample_rate = sf.read(path, dtype='float64', always_2d=True)
    except _SOUNDFILE_ERRORS as e:
        msg = "Corrupt WAV data in '{}': {}".format(path, e)
        logger.error(msg)
        raise CorruptHeader(msg) from e
    except OSError as e:
        msg = "Cannot read '{}': {}".format(path, e)
        logger.error(msg)
        raise IoFailure(msg) from e
    logger.debug("Read {} ({} samples, {} channels, {})".format(path, samples.shape[0], samples.shape[1],
                                                               info.subtype))
    return TimeSignal(samples, sample_rate)


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    """Round to the 16 bit grid, clipped to [-1, 1 - 2^-15]."""
    return np.clip(np.round(samples * 32768.), -32768, 32767).astype(np.int16)


def write_wav(path: str, signal: TimeSignal, format: str = 'float32') -> None:
    """
    Write a TimeSignal as WAV.

    Parameters:
        path:
            Target file.

        signal:
            The signal to store.

        format:
            'float32' (lossless for float32-representable samples) or 'pcm16'.

    """
    if format not in WRITE_FORMATS:
        msg = "Unknown WAV write format '{}', choose from {}".format(format, list(WRITE_FORMATS))
        logger.error(msg)
        raise UnsupportedFormat(msg)
    if format == 'pcm16':
        data = quantize_pcm16(signal.samples)
    else:
        data = signal.samples.astype(np.float32)
    try:
        sf.write(path, data, signal.sample_rate, subtype=WRITE_FORMATS[format], format='WAV')
    except (OSError, ) + _SOUNDFILE_ERRORS as e:
        msg = "Cannot write '{}': {}".format(path, e)
        logger.error(msg)
        raise IoFailure(msg) from e
