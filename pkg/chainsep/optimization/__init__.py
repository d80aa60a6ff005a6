""" STFT configuration sweeps over simulated scene corpora."""
