"""Synthetic multichannel mixtures with known ground truth.

Randomness of a scene flows from a single integer seed:
    SeedSequence(seed).spawn(3) -> (sources, filters, noise)
and the sources stream is spawned once more into one child per source.
"""
import os
from typing import List

import numpy as np
from joblib import Parallel, delayed
from scipy.signal import fftconvolve

from chainsep.base.audio_io import write_wav
from chainsep.base.errors import ConfigError
from chainsep.base.run_config import write_json_file, MIXING_MODELS, SOURCE_MODELS
from chainsep.base.signals import TimeSignal
from chainsep.base.tensor_container import write_tensor
from chainsep.seplogger.logger import logger

SEGMENT_SECONDS = (0.05, 0.3)
ENVELOPE_LEVELS = (0.05, 1.)
CROSSFADE_SECONDS = 0.02
GAIN_RANGE = (0.5, 1.5)
MAX_DELAY = 8
MIN_DURATION = 0.5


class SceneParams:
    """
    Parameters:
        channels:
            Number of microphones M (>= 2).

        sources:
            Number of sources K.

        duration:
            Length in seconds.

        mixing:
            'instantaneous', 'delays' or 'exp_decay_rir'.

        rir_length:
            Taps of exp_decay_rir filters.

        decay_rate:
            Exponential time constant of the reverberant tail in seconds.

        drr_db:
            Direct-to-reverberant energy ratio of exp_decay_rir filters.

        snr_db:
            Image-to-noise power ratio; inf disables the noise.

        sir_db:
            Power step between consecutive sources.

        source_model:
            'am_noise' or 'am_tones'.

    """
    def __init__(self, channels: int = 6, sources: int = 2, duration: float = 4.0, sample_rate: int = 8000,
                 mixing: str = 'exp_decay_rir', rir_length: int = 2048, decay_rate: float = 0.08,
                 drr_db: float = 0., snr_db: float = 25., sir_db: float = 0., source_model: str = 'am_noise'):
        self.channels = int(channels)
        self.sources = int(sources)
        self.duration = float(duration)
        self.sample_rate = int(sample_rate)
        self.mixing = mixing
        self.rir_length = int(rir_length)
        self.decay_rate = float(decay_rate)
        self.drr_db = float(drr_db)
        self.snr_db = float(snr_db)
        self.sir_db = float(sir_db)
        self.source_model = source_model
        self.validate()

    def validate(self):
        problems = list()
        if self.channels < 2:
            problems.append("channels must be >= 2")
        if self.sources < 1:
            problems.append("sources must be >= 1")
        if self.duration <= 0:
            problems.append("duration must be positive")
        if self.rir_length < 1:
            problems.append("rir_length must be >= 1")
        if self.decay_rate <= 0:
            problems.append("decay_rate must be positive")
        if self.mixing not in MIXING_MODELS:
            problems.append("mixing must be one of {}".format(MIXING_MODELS))
        if self.source_model not in SOURCE_MODELS:
            problems.append("source_model must be one of {}".format(SOURCE_MODELS))
        if problems:
            msg = "Invalid scene parameters: " + "; ".join(problems)
            logger.error(msg)
            raise ConfigError(msg)

    @property
    def num_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_run_config(cls, run_config) -> 'SceneParams':
        keys = ['channels', 'sources', 'duration', 'sample_rate', 'mixing', 'rir_length', 'decay_rate', 'drr_db',
                'snr_db', 'sir_db', 'source_model']
        return cls(**{key: run_config[key] for key in keys})


class MixtureScene:

    def __init__(self, sources: List[TimeSignal], images: List[TimeSignal], mixture: TimeSignal,
                 filters: np.ndarray, noise: TimeSignal, seed: int, params: SceneParams):
        self.sources = sources
        self.images = images
        self.mixture = mixture
        self.filters = filters
        self.noise = noise
        self.seed = seed
        self.params = params

    def reference_images(self, ref_channel: int = 0) -> TimeSignal:
        """Source images at the reference microphone, one column per source."""
        return TimeSignal(np.stack([image.samples[:, ref_channel] for image in self.images], axis=1),
                          self.params.sample_rate)


def _seed_streams(seed: int, num_sources: int):
    source_seq, filter_seq, noise_seq = np.random.SeedSequence(seed).spawn(3)
    return source_seq.spawn(num_sources), filter_seq, noise_seq


def envelope(num_samples: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    """Piecewise constant log-uniform levels on 50-300 ms segments, joined by 20 ms raised-cosine fades."""
    boundaries = [0]
    while boundaries[-1] < num_samples:
        boundaries.append(boundaries[-1] + int(round(rng.uniform(*SEGMENT_SECONDS) * sample_rate)))
    levels = np.exp(rng.uniform(np.log(ENVELOPE_LEVELS[0]), np.log(ENVELOPE_LEVELS[1]), len(boundaries) - 1))

    values = np.empty(boundaries[-1])
    for level, start, stop in zip(levels, boundaries[:-1], boundaries[1:]):
        values[start:stop] = level

    fade = max(int(round(CROSSFADE_SECONDS * sample_rate)), 1)
    ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(fade) + 0.5) / fade)
    for i, boundary in enumerate(boundaries[1:-1], start=1):
        start = max(boundary - fade // 2, 0)
        stop = min(start + fade, values.shape[0])
        values[start:stop] = levels[i - 1] + (levels[i] - levels[i - 1]) * ramp[:stop - start]
    return values[:num_samples]


def _carrier(model: str, num_samples: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    if model == 'am_noise':
        return rng.standard_normal(num_samples)
    # harmonic tone complex with 1/h amplitudes up to a quarter of the sample rate
    f0 = rng.uniform(100., 300.)
    harmonics = np.arange(1, int(sample_rate / 4 // f0) + 1)
    phases = rng.uniform(0, 2 * np.pi, harmonics.shape[0])
    t = np.arange(num_samples) / sample_rate
    return np.sum(np.sin(2 * np.pi * f0 * harmonics[:, None] * t[None] + phases[:, None]) / harmonics[:, None],
                  axis=0)


def generate_source(model: str = 'am_noise', duration: float = 4.0, seed=0, sample_rate: int = 8000) -> TimeSignal:
    """
    Amplitude modulated source with unit RMS.

    Parameters:
        model:
            'am_noise' (white Gaussian carrier) or 'am_tones' (harmonic complex carrier).

        duration:
            Seconds, at least 0.5.

        seed:
            Integer or numpy SeedSequence.

    """
    if duration < MIN_DURATION:
        msg = "Sources must last at least {} s, got {}".format(MIN_DURATION, duration)
        logger.error(msg)
        raise ConfigError(msg)
    if model not in SOURCE_MODELS:
        msg = "Unknown source model '{}', choose from {}".format(model, SOURCE_MODELS)
        logger.error(msg)
        raise ConfigError(msg)
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    signal = _carrier(model, n, sample_rate, rng) * envelope(n, sample_rate, rng)
    signal /= np.sqrt(np.mean(signal ** 2))
    return TimeSignal(signal, sample_rate)


def generate_filters(params: SceneParams, seed=0) -> np.ndarray:
    """
    FIR filters of all (source, microphone) pairs, shape [K, M, L].

    instantaneous: L = 1 with a gain in [0.5, 1.5]
    delays: a single gain tap at an integer delay in [0, 8]
    exp_decay_rir: a +-1 direct tap at a delay in [0, 8] followed by an exponentially decaying
    Gaussian tail whose energy sits drr_db below the direct path
    """
    rng = np.random.default_rng(seed)
    k, m = params.sources, params.channels
    if params.mixing == 'instantaneous':
        return rng.uniform(*GAIN_RANGE, size=(k, m, 1))
    if params.mixing == 'delays':
        filters = np.zeros((k, m, MAX_DELAY + 1))
        delays = rng.integers(0, MAX_DELAY + 1, size=(k, m))
        gains = rng.uniform(*GAIN_RANGE, size=(k, m))
        for source in range(k):
            for channel in range(m):
                filters[source, channel, delays[source, channel]] = gains[source, channel]
        return filters

    length = max(params.rir_length, MAX_DELAY + 2)
    filters = np.zeros((k, m, length))
    time_constant = params.decay_rate * params.sample_rate
    tail_energy = 10 ** (-params.drr_db / 10)
    for source in range(k):
        for channel in range(m):
            delay = int(rng.integers(0, MAX_DELAY + 1))
            filters[source, channel, delay] = rng.choice([-1., 1.])
            n = np.arange(delay + 1, length)
            tail = rng.standard_normal(n.shape[0]) * np.exp(-(n - delay) / time_constant)
            filters[source, channel, delay + 1:] = tail * np.sqrt(tail_energy / np.sum(tail ** 2))
    return filters


def mix_scene(params: SceneParams, seed: int = 0) -> MixtureScene:
    """Sources -> per-pair convolution -> sum of images + white noise at snr_db."""
    source_seeds, filter_seed, noise_seed = _seed_streams(seed, params.sources)
    n = params.num_samples
    sources = list()
    for k, source_seed in enumerate(source_seeds):
        source = generate_source(params.source_model, params.duration, source_seed, params.sample_rate)
        sources.append(TimeSignal(source.samples[:, 0] * 10 ** (-k * params.sir_db / 20), params.sample_rate))
    filters = generate_filters(params, filter_seed)

    images = list()
    for k, source in enumerate(sources):
        image = np.stack([fftconvolve(source.samples[:, 0], filters[k, m])[:n] for m in range(params.channels)],
                         axis=1)
        images.append(TimeSignal(image, params.sample_rate))

    image_power = sum(np.mean(image.samples ** 2) for image in images)
    if np.isinf(params.snr_db) and params.snr_db > 0:
        noise = np.zeros((n, params.channels))
    else:
        noise = np.random.default_rng(noise_seed).standard_normal((n, params.channels))
        noise *= np.sqrt(image_power / 10 ** (params.snr_db / 10) / np.mean(noise ** 2))

    mixture = np.sum([image.samples for image in images], axis=0) + noise
    logger.debug("Scene {}: {} sources, {} channels, {} mixing".format(seed, params.sources, params.channels,
                                                                      params.mixing))
    return MixtureScene(sources, images, TimeSignal(mixture, params.sample_rate), filters,
                        TimeSignal(noise, params.sample_rate), seed, params)


def write_scene(scene: MixtureScene, directory: str):
    """mixture.wav, image_k.wav, source_k.wav, noise.wav, filters.bsst and scene.json."""
    os.makedirs(directory, exist_ok=True)
    write_wav(os.path.join(directory, 'mixture.wav'), scene.mixture)
    write_wav(os.path.join(directory, 'noise.wav'), scene.noise)
    for k, (source, image) in enumerate(zip(scene.sources, scene.images)):
        write_wav(os.path.join(directory, 'source_{}.wav'.format(k)), source)
        write_wav(os.path.join(directory, 'image_{}.wav'.format(k)), image)
    write_tensor(os.path.join(directory, 'filters.bsst'), scene.filters)
    write_json_file({'seed': scene.seed, 'params': scene.params.to_dict()}, os.path.join(directory, 'scene.json'))


def _simulate_one(params: SceneParams, seed: int, directory: str) -> str:
    write_scene(mix_scene(params, seed), directory)
    return directory


def simulate_scenes(params: SceneParams, out_dir: str, count: int = 1, seed: int = 0, processes: int = 1) -> list:
    """
    Write count scenes to out_dir/scene_000, scene_001, ...; scene i uses seed + i.
    """
    directories = [os.path.join(out_dir, 'scene_{:03d}'.format(i)) for i in range(count)]
    logger.info("Simulating {} scenes into {} with {} process(es)".format(count, out_dir, processes))
    written = Parallel(n_jobs=processes)(delayed(_simulate_one)(params, seed + i, directory)
                                         for i, directory in enumerate(directories))
    return list(written)
