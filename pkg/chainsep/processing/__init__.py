"""
chainsep classes for scoring separated sources and summarizing results over many mixtures.
"""
