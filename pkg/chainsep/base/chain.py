"""Serial SMM -> IVA separation.

The SMM stage (cACGMM masks + MVDR) runs at a short STFT, its source
estimates are taken back to the time domain and analysed again at the IVA
STFT size, where they seed the OverIVA demixing rows by least squares.
"""
import os
import time
from contextlib import contextmanager
from typing import Callable, List

import numpy as np

from chainsep.base.audio_io import write_wav
from chainsep.base.errors import ChainsepError, ConfigError, StageError
from chainsep.base.signals import TimeSignal, StftConfig
from chainsep.base.stft import stft, istft
from chainsep.base.tensor_container import write_tensor, read_tensor
from chainsep.modelwrapper.separators import CACGMMSeparator, OverIVASeparator
from chainsep.seplogger.logger import logger

IVA_INIT_MODES = ['identity', 'pca', 'smm', 'oracle']


class ChainConfig:
    """
    Parameters:
        num_sources:
            Number of speakers K.

        noise_class:
            Run the SMM with K + 1 classes and drop the noise class before beamforming.

        smm_stft, iva_stft:
            STFT setups of the two stages (defaults 1024 and 2048 with quarter shifts).

        smm_iterations, iva_iterations:
            EM iterations and OverIVA outer iterations.

        seed:
            Seed of the SMM initialization.

        iva_init:
            'smm' (least squares from the SMM estimates), 'identity', 'pca' or 'oracle'.

        ref_channel:
            Forced MVDR reference (None selects per source); also the minimum distortion reference
            (0 when None).

        extraction:
            'mvdr' or the debug path 'mask_multiply'.

        dump_dir:
            Directory receiving intermediate artifacts; None disables dumping.

        pre_stage:
            Optional callable TimeSignal -> TimeSignal applied before everything else.

    """
    def __init__(self, num_sources: int = 2, noise_class: bool = True, smm_stft: StftConfig = None,
                 iva_stft: StftConfig = None, smm_iterations: int = 20, iva_iterations: int = 50, seed: int = 0,
                 iva_init: str = 'smm', ref_channel: int = None, permutation_solver: bool = True,
                 extraction: str = 'mvdr', dump_dir: str = None,
                 pre_stage: Callable[[TimeSignal], TimeSignal] = None):
        if iva_init not in IVA_INIT_MODES:
            msg = "Unknown IVA init '{}', choose from {}".format(iva_init, IVA_INIT_MODES)
            logger.error(msg)
            raise ConfigError(msg)
        self.num_sources = int(num_sources)
        self.noise_class = noise_class
        self.smm_stft = smm_stft if smm_stft is not None else StftConfig(1024)
        self.iva_stft = iva_stft if iva_stft is not None else StftConfig(2048)
        self.smm_iterations = smm_iterations
        self.iva_iterations = iva_iterations
        self.seed = seed
        self.iva_init = iva_init
        self.ref_channel = ref_channel
        self.permutation_solver = permutation_solver
        self.extraction = extraction
        self.dump_dir = dump_dir
        self.pre_stage = pre_stage

    @property
    def rescale_reference(self) -> int:
        return 0 if self.ref_channel is None else int(self.ref_channel)

    @classmethod
    def from_run_config(cls, run_config, pre_stage=None) -> 'ChainConfig':
        algorithm = run_config['algorithm']
        return cls(num_sources=run_config['sources'],
                   noise_class=run_config['noise_class'],
                   smm_stft=run_config.stft_config('smm'),
                   iva_stft=run_config.stft_config('iva'),
                   smm_iterations=run_config['iterations'],
                   iva_iterations=run_config.iva_iterations(algorithm),
                   seed=run_config['seed'],
                   iva_init=run_config.init_mode(),
                   ref_channel=run_config['ref_channel'],
                   permutation_solver=run_config['permutation_solver'],
                   extraction='mask_multiply' if run_config['mask_multiply'] else 'mvdr',
                   dump_dir=run_config['dump_intermediate'],
                   pre_stage=pre_stage)


@contextmanager
def stage(name: str, report: dict):
    """Time a stage and convert any failure into a StageError tagged with its name."""
    start = time.perf_counter()
    logger.info("Stage {} started".format(name))
    try:
        yield
    except StageError:
        raise
    except (ChainsepError, np.linalg.LinAlgError, ValueError, FloatingPointError) as e:
        msg = "{}: {}".format(type(e).__name__, e)
        logger.error("Stage {} failed with {}".format(name, msg))
        raise StageError(name, msg) from e
    report.setdefault('seconds', dict())[name] = round(time.perf_counter() - start, 4)


class SeparationChain:

    def __init__(self, config: ChainConfig = None):
        self.config = config if config is not None else ChainConfig()
        self.report = dict()

    def _dump_path(self, name: str) -> str:
        return os.path.join(self.config.dump_dir, name)

    def _dump_tensor(self, name: str, tensor: np.ndarray):
        if self.config.dump_dir is not None:
            write_tensor(self._dump_path(name), tensor)

    def _dump_sources(self, prefix: str, sources: TimeSignal):
        if self.config.dump_dir is not None:
            for k in range(sources.num_channels):
                write_wav(self._dump_path('{}{}.wav'.format(prefix, k)), sources.channel(k))

    def _prepare(self, signal: TimeSignal) -> TimeSignal:
        if signal.num_channels < 2:
            msg = "Separation requires at least two channels, got {}".format(signal.num_channels)
            logger.error(msg)
            raise ConfigError(msg)
        if self.config.num_sources > signal.num_channels:
            msg = "Cannot extract {} sources from {} channels".format(self.config.num_sources, signal.num_channels)
            logger.error(msg)
            raise ConfigError(msg)
        if self.config.dump_dir is not None:
            os.makedirs(self.config.dump_dir, exist_ok=True)
        self.report = {'input': {'num_samples': signal.num_samples, 'num_channels': signal.num_channels,
                                 'sample_rate': signal.sample_rate}}
        if self.config.pre_stage is not None:
            with stage('pre_stage', self.report):
                signal = self.config.pre_stage(signal)
        return signal

    def run_smm(self, signal: TimeSignal) -> TimeSignal:
        """cACGMM masks and beamforming at the SMM STFT config; returns K time-domain estimates."""
        config = self.config
        with stage('smm_stft', self.report):
            spec = stft(signal, config.smm_stft)
        with stage('cacgmm', self.report):
            separator = CACGMMSeparator(config.num_sources, config.noise_class, config.smm_iterations, config.seed,
                                        config.permutation_solver, config.ref_channel, config.extraction)
            separator.fit(spec)
            self._dump_tensor('masks.bsst', separator.masks_)
        with stage('beamforming', self.report):
            estimates = separator.transform(spec)
            if separator.beamformers_ is not None:
                self._dump_tensor('beamformers.bsst', separator.beamformers_.w)
        self.report['cacgmm'] = separator.report()
        with stage('smm_istft', self.report):
            smm_sources = istft(estimates, signal.num_samples)
            self._dump_tensor('smm_estimates.bsst', smm_sources.samples)
            self._dump_sources('smm_est_', smm_sources)
        return smm_sources

    def run_iva(self, signal: TimeSignal, seed_sources: TimeSignal = None, init: str = None) -> TimeSignal:
        """
        OverIVA at the IVA STFT config.

        Parameters:
            signal:
                The (pre-processed) mixture.

            seed_sources:
                K time-domain signals seeding the least squares init (SMM estimates or oracle images).

            init:
                'identity', 'pca' or 'from_estimates'; derived from the config if None.

        """
        config = self.config
        if init is None:
            init = 'from_estimates' if config.iva_init in ('smm', 'oracle') else config.iva_init
        with stage('iva_stft', self.report):
            spec = stft(signal, config.iva_stft)
            seed_spec = stft(seed_sources, config.iva_stft) if init == 'from_estimates' else None
        with stage('overiva', self.report):
            separator = OverIVASeparator(config.num_sources, config.iva_iterations,
                                         init, config.rescale_reference)
            separator.fit(spec, estimates=seed_spec)
            self._dump_tensor('W_init.bsst', separator.W_init_)
            self._dump_tensor('W_final.bsst', separator.W_tilde_)
        self.report['overiva'] = separator.report()
        with stage('iva_istft', self.report):
            sources = istft(separator.estimates_, signal.num_samples)
            self._dump_sources('est_', sources)
        return sources

    @staticmethod
    def _split(sources: TimeSignal) -> List[TimeSignal]:
        return [sources.channel(k) for k in range(sources.num_channels)]

    def run_chain(self, signal: TimeSignal, oracle_sources: TimeSignal = None):
        """
        SMM -> beamforming -> handoff -> least squares init -> OverIVA -> rescaling.

        Parameters:
            signal:
                Mixture with at least two channels.

            oracle_sources:
                Reference images [N, K] used instead of the SMM estimates when iva_init is 'oracle'.

        Returns:
            One TimeSignal per source (input length) and the report dictionary.

        """
        signal = self._prepare(signal)
        if self.config.iva_init == 'oracle':
            if oracle_sources is None:
                msg = "IVA init 'oracle' needs the reference images."
                logger.error(msg)
                raise ConfigError(msg)
            seed_sources = oracle_sources
        else:
            seed_sources = self.run_smm(signal)
        sources = self.run_iva(signal, seed_sources)
        logger.info("Chain finished: {} sources of {} samples".format(sources.num_channels, sources.num_samples))
        return self._split(sources), self.report

    def resume_iva(self, signal: TimeSignal, dump_dir: str = None):
        """Re-run the IVA stages from a dumped SMM handoff (smm_estimates.bsst)."""
        dump_dir = dump_dir if dump_dir is not None else self.config.dump_dir
        if dump_dir is None:
            msg = "resume_iva needs a dump directory."
            logger.error(msg)
            raise ConfigError(msg)
        signal = self._prepare(signal)
        with stage('resume', self.report):
            samples = read_tensor(os.path.join(dump_dir, 'smm_estimates.bsst'))
            seed_sources = TimeSignal(samples, signal.sample_rate)
        sources = self.run_iva(signal, seed_sources, init='from_estimates')
        return self._split(sources), self.report

    def run_cacgmm_only(self, signal: TimeSignal):
        signal = self._prepare(signal)
        return self._split(self.run_smm(signal)), self.report

    def run_overiva_only(self, signal: TimeSignal, oracle_sources: TimeSignal = None):
        if self.config.iva_init == 'smm':
            msg = "IVA init 'smm' needs the SMM stage; use the chain algorithm."
            logger.error(msg)
            raise ConfigError(msg)
        signal = self._prepare(signal)
        if self.config.iva_init == 'oracle':
            if oracle_sources is None:
                msg = "IVA init 'oracle' needs the reference images."
                logger.error(msg)
                raise ConfigError(msg)
            sources = self.run_iva(signal, oracle_sources, init='from_estimates')
        else:
            sources = self.run_iva(signal, init=self.config.iva_init)
        return self._split(sources), self.report

    def separate(self, signal: TimeSignal, algorithm: str = 'chain', oracle_sources: TimeSignal = None):
        if algorithm == 'chain':
            return self.run_chain(signal, oracle_sources)
        if algorithm == 'cacgmm':
            return self.run_cacgmm_only(signal)
        if algorithm == 'overiva':
            return self.run_overiva_only(signal, oracle_sources)
        msg = "Unknown algorithm '{}'".format(algorithm)
        logger.error(msg)
        raise ConfigError(msg)
