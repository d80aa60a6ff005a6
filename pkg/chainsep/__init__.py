"""
chainsep
is a multichannel blind source separation toolkit. It estimates source masks with a complex angular
central Gaussian mixture model, extracts the sources with mask-based MVDR beamformers and refines them with
overdetermined independent vector analysis, initialized from the beamformer outputs by least squares.

A scene simulator and SDR evaluation make every step verifiable on synthetic mixtures with ground truth.

"""

__version__ = '0.3.0'
