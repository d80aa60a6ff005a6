import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from chainsep.base.signals import MultichannelSpectrogram, SourceEstimates
from chainsep.modelwrapper.beamforming import beamform_from_masks, mask_multiply, target_classes_without_noise
from chainsep.modelwrapper.cacgmm import run_cacgmm
from chainsep.modelwrapper.initialization import InitSpec
from chainsep.modelwrapper.overiva import run_overiva, observation_covariance, demix, minimum_distortion_rescale
from chainsep.seplogger.logger import logger


class CACGMMSeparator(BaseEstimator, TransformerMixin):
    """
    Spatial mixture model separation: cACGMM masks followed by MVDR beamforming.

    Parameters:
        num_sources:
            Number of speakers K.

        noise_class:
            Add one extra class for noise; the class with the lowest average weight is dropped.

        iterations:
            EM iterations.

        seed:
            Seed of the shape matrix initialization.

        permutation_solver:
            Align classes across frequencies during EM.

        ref_channel:
            Forced beamformer reference; None selects it per source.

        extraction:
            'mvdr' or the debug path 'mask_multiply'.

    """
    _estimator_type = "transformer"

    def __init__(self, num_sources: int = 2, noise_class: bool = True, iterations: int = 20, seed: int = 0,
                 permutation_solver: bool = True, ref_channel: int = None, extraction: str = 'mvdr'):
        self.num_sources = num_sources
        self.noise_class = noise_class
        self.iterations = iterations
        self.seed = seed
        self.permutation_solver = permutation_solver
        self.ref_channel = ref_channel
        self.extraction = extraction

    @property
    def num_classes(self) -> int:
        return self.num_sources + int(bool(self.noise_class))

    def fit(self, spec: MultichannelSpectrogram, y=None):
        self.state_, self.masks_, trace = run_cacgmm(spec, self.num_classes, self.iterations, self.seed,
                                                     permutation_solver=self.permutation_solver)
        self.log_likelihood_ = trace['log_likelihood']
        self.reseeded_ = trace['reseeded']
        if self.noise_class:
            self.target_classes_ = target_classes_without_noise(self.state_.pi)
        else:
            self.target_classes_ = list(range(self.num_classes))
        logger.debug("cACGMM target classes {}".format(self.target_classes_))
        return self

    def transform(self, spec: MultichannelSpectrogram) -> SourceEstimates:
        if self.extraction == 'mask_multiply':
            self.beamformers_ = None
            ref = 0 if self.ref_channel is None else self.ref_channel
            return mask_multiply(spec, self.masks_, self.target_classes_, ref)
        if self.extraction != 'mvdr':
            msg = "Unknown extraction '{}', choose 'mvdr' or 'mask_multiply'".format(self.extraction)
            logger.error(msg)
            raise ValueError(msg)
        estimates, self.beamformers_ = beamform_from_masks(spec, self.masks_, self.target_classes_,
                                                           self.ref_channel)
        return estimates

    def report(self) -> dict:
        report = {'params': self.get_params(),
                  'log_likelihood': [float(v) for v in self.log_likelihood_],
                  'reseeded_classes': int(self.reseeded_),
                  'target_classes': [int(k) for k in self.target_classes_]}
        if getattr(self, 'beamformers_', None) is not None:
            report['reference_channels'] = self.beamformers_.reference_channel
            report['degenerate_bins'] = self.beamformers_.num_degenerate
        return report


class OverIVASeparator(BaseEstimator, TransformerMixin):
    """
    Overdetermined IVA.

    Parameters:
        num_sources:
            K.

        iterations:
            Outer IP iterations.

        init:
            'identity', 'pca' or 'from_estimates' (pass the estimates to fit).

        ref_channel:
            Reference microphone of the minimum distortion rescaling.

        rescale:
            Apply minimum distortion rescaling.

    """
    _estimator_type = "transformer"

    def __init__(self, num_sources: int = 2, iterations: int = 100, init: str = 'identity', ref_channel: int = 0,
                 rescale: bool = True):
        self.num_sources = num_sources
        self.iterations = iterations
        self.init = init
        self.ref_channel = ref_channel
        self.rescale = rescale

    def fit(self, spec: MultichannelSpectrogram, y=None, estimates: SourceEstimates = None, W_init: np.ndarray = None):
        """
        Parameters:
            spec:
                Observations at the IVA STFT config.

            estimates:
                Source estimates at the same config, for init='from_estimates'.

            W_init:
                Explicit initial W_tilde; overrides init.

        """
        sigma_y = observation_covariance(spec)
        self.fallback_bins_ = 0
        if W_init is None:
            init_spec = InitSpec(self.init, estimates, self.num_sources)
            W_init = init_spec.initial_demixing(spec, sigma_y)
            if init_spec.fallback_mask is not None:
                self.fallback_bins_ = int(np.sum(init_spec.fallback_mask))
        self.W_init_ = np.array(W_init, copy=True)
        self.state_, self.estimates_ = run_overiva(spec, self.num_sources, self.iterations, W_init,
                                                   self.ref_channel, self.rescale)
        self.W_tilde_ = self.state_.W_tilde
        self.nll_ = self.state_.nll
        return self

    def transform(self, spec: MultichannelSpectrogram) -> SourceEstimates:
        estimates = SourceEstimates(demix(spec, self.W_tilde_[:, :self.num_sources]), spec.config, spec.sample_rate)
        if self.rescale:
            estimates = minimum_distortion_rescale(estimates, spec, self.ref_channel)
        return estimates

    def report(self) -> dict:
        return {'params': self.get_params(),
                'nll': [float(v) for v in self.nll_],
                'skipped_rows': int(self.state_.skipped_rows),
                'background_failures': int(self.state_.background_failures),
                'ls_fallback_bins': int(self.fallback_bins_)}
