"""Output-rate and storage arithmetic for the default sensor configs."""

import pytest

from spectrumlab import SensorConfig, estimate_output_rate, storage_bytes
from spectrumlab.errors import InvalidArgument


def test_default_psd_rate_lands_in_expected_band():
    # 256 bins x 32 bit + 64-byte header, every 125 ms  ->  ~69.6 Kb/s.
    config = SensorConfig()
    rate = estimate_output_rate(config)
    assert rate == pytest.approx((256 * 32 + 64 * 8) / 0.125)
    assert rate == pytest.approx(69.632e3)
    assert 50e3 <= rate <= 100e3


def test_monthly_fleet_storage_is_about_a_terabyte():
    total = storage_bytes(50e3, n_sensors=60, days=30)
    assert total == pytest.approx(0.972e12)
    assert abs(total - 1e12) / 1e12 < 0.10


def test_rate_vanishes_with_infinite_dwell():
    slow = SensorConfig(dwell_ms=1e12)
    assert estimate_output_rate(slow) < 1e-3
    rates = [estimate_output_rate(SensorConfig(dwell_ms=d))
             for d in (125, 1250, 12500)]
    assert rates == sorted(rates, reverse=True)


def test_rate_estimate_is_psd_only():
    with pytest.raises(InvalidArgument):
        estimate_output_rate(SensorConfig(pipeline="iq"))


def test_config_validation():
    with pytest.raises(InvalidArgument):
        SensorConfig(fft_size=100)
    with pytest.raises(InvalidArgument):
        SensorConfig(fft_size=128)            # below the sensor floor
    with pytest.raises(InvalidArgument):
        SensorConfig(band=(1e6, 2e6))         # under the 20 MHz floor
    with pytest.raises(InvalidArgument):
        SensorConfig(band=(1e9, 7e9))         # over the 6 GHz ceiling
    cfg = SensorConfig(band=(400e6, 800e6))
    assert cfg.scan_state().hop_list[0] == pytest.approx(400e6 + 1.2e6)


def test_config_dict_round_trip():
    cfg = SensorConfig(band=(400e6, 800e6), strategy="bursty-weighted",
                       dwell_ms=250.0)
    assert SensorConfig.from_dict(cfg.to_dict()) == cfg
