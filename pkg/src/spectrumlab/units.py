"""Unit helpers and platform-wide constants.

All stored power values are linear mW; dB conversion happens only at the
API edge (serving responses and analytics thresholds).
"""

import math

# Tunable front-end range of the simulated sensors.
PLATFORM_F_LO = 20e6   # Hz
PLATFORM_F_HI = 6e9    # Hz

# Front-end bandwidth of the low-end SDR dongles the sensors emulate.
DEFAULT_SAMPLE_RATE = 2.4e6  # Hz

_MW_FLOOR = 1e-30  # avoid log10(0) for all-zero bins


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(max(mw, _MW_FLOOR))


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def db_to_power_ratio(db: float) -> float:
    return 10.0 ** (db / 10.0)
