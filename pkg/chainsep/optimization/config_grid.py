from itertools import product

from chainsep.base.errors import ConfigError
from chainsep.base.signals import StftConfig
from chainsep.seplogger.logger import logger

GRID_THRESHOLD = 10000


def create_sweep_grid(algorithms: list, stft_sizes: list, shift_fractions: list) -> list:
    """
    Cells of an STFT sweep in deterministic order (algorithm outer, size, then shift).

    Parameters:
        algorithms:
            Names out of cacgmm, overiva, chain and observation.

        stft_sizes:
            Window sizes; a power of two each.

        shift_fractions:
            Frame shift as a fraction of the window size.

    Returns:
        List of dicts with keys algorithm, stft_size and shift.

    """
    total = len(algorithms) * len(stft_sizes) * len(shift_fractions)
    if total == 0:
        msg = "The sweep grid is empty."
        logger.error(msg)
        raise ConfigError(msg)
    if total > GRID_THRESHOLD:
        msg = 'The sweep grid entails more than ' + str(GRID_THRESHOLD) + ' cells. This might take very long.'
        logger.error(msg)
        raise ConfigError(msg)
    cells = list()
    for algorithm, size, fraction in product(algorithms, stft_sizes, shift_fractions):
        shift = int(round(size * fraction))
        StftConfig(size, shift)
        cells.append({'algorithm': algorithm, 'stft_size': int(size), 'shift': shift})
    return cells
