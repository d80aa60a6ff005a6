from .separators import CACGMMSeparator, OverIVASeparator
