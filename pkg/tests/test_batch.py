"""Master dataset dedup/idempotence and aggregate table correctness."""

import numpy as np
import pytest

from spectrumlab import AggregateStore, MasterStore, NoSuchView, build_aggregates
from spectrumlab.wire import Envelope

LEVEL_60S_100K = (60_000, 100e3)
LEVEL_60S_1M = (60_000, 1e6)


def psd_env(sensor="sn-a", seq=0, t0=0, fc=600e6, bins=(1.0, 2.0),
            bin_width=100e3):
    return Envelope(sensor_id=sensor, campaign_id="", seq=seq, kind="psd",
                    center_freq=fc, t0_ms=t0, dwell_ms=125.0, gain_meta={},
                    bin_width=bin_width, n_avg=1, bins=list(bins))


# -- master dataset -----------------------------------------------------------

def test_duplicate_key_kept_once(tmp_path):
    master = MasterStore(tmp_path)
    stats = master.compact([psd_env(seq=1), psd_env(seq=1)])
    assert stats == {"appended": 1, "duplicates": 1, "invalid": 0}
    assert master.count() == 1
    master.close()


def test_replay_twice_is_byte_identical(tmp_path):
    envs = [psd_env(seq=i, t0=i * 1000) for i in range(50)]
    master = MasterStore(tmp_path / "m")
    master.compact(envs)
    first = (tmp_path / "m" / "master.seg").read_bytes()
    master.compact(envs)                     # full replay
    second = (tmp_path / "m" / "master.seg").read_bytes()
    assert first == second
    master.close()


def test_dedup_rate_under_injected_duplication(tmp_path):
    rng = np.random.default_rng(0)
    envs = [psd_env(seq=i) for i in range(10_000)]
    dups = [envs[i] for i in rng.choice(10_000, size=100, replace=False)]
    master = MasterStore(tmp_path)
    stats = master.compact(envs + dups)
    assert stats["appended"] == 10_000
    assert stats["duplicates"] == 100
    master.close()


def test_master_survives_reopen_with_dedup_index(tmp_path):
    master = MasterStore(tmp_path)
    master.compact([psd_env(seq=i) for i in range(10)])
    master.close()
    reopened = MasterStore(tmp_path)
    stats = reopened.compact([psd_env(seq=5), psd_env(seq=10)])
    assert stats["appended"] == 1 and stats["duplicates"] == 1
    assert reopened.count() == 11
    reopened.close()


def test_invalid_record_skipped_and_counted(tmp_path):
    master = MasterStore(tmp_path)
    stats = master.compact([psd_env(seq=0), '{"broken": true}'])
    assert stats["appended"] == 1 and stats["invalid"] == 1
    master.close()


# -- aggregates -----------------------------------------------------------------

def test_singleton_cell(tmp_path):
    master = MasterStore(tmp_path)
    master.compact([psd_env(seq=0, t0=30_000, fc=600e6, bins=[3.5],
                            bin_width=100e3)])
    tables = build_aggregates(master, levels=[LEVEL_60S_100K])
    acc = tables[LEVEL_60S_100K]
    assert len(acc) == 1
    (key, slot), = acc.items()
    assert key == ("sn-a", 0, 600e6)       # bin center 600e6 (odd bin count)
    assert slot == [3.5, 1, 3.5]
    master.close()


def test_two_point_avg_and_max(tmp_path):
    master = MasterStore(tmp_path)
    master.compact([
        psd_env(seq=0, t0=1000, bins=[2.0], bin_width=100e3),
        psd_env(seq=1, t0=2000, bins=[4.0], bin_width=100e3),
    ])
    store = AggregateStore(tmp_path / "agg")
    store.publish(build_aggregates(master, levels=[LEVEL_60S_100K]))
    avg = store.query("sn-a", 0, 60_000, 0, 1e9, LEVEL_60S_100K, "avg")
    peak = store.query("sn-a", 0, 60_000, 0, 1e9, LEVEL_60S_100K, "max")
    assert len(avg) == 1 and avg[0].value_mw == pytest.approx(3.0)
    assert peak[0].value_mw == pytest.approx(4.0)
    assert avg[0].count == 2
    master.close()


def test_refinement_consistency_over_random_data(tmp_path):
    """A 120 s parent cell must equal the merge of its 60 s children."""
    rng = np.random.default_rng(3)
    envs = []
    for i in range(200):
        envs.append(psd_env(
            seq=i, t0=int(rng.integers(0, 120_000)),
            fc=600e6 + float(rng.integers(0, 8)) * 100e3,
            bins=list(rng.exponential(1e-9, size=4)),
            bin_width=25e3))
    master = MasterStore(tmp_path)
    master.compact(envs)
    fine = build_aggregates(master, levels=[(60_000, 100e3)])[(60_000, 100e3)]
    coarse = build_aggregates(master, levels=[(120_000, 100e3)])[(120_000, 100e3)]
    for (s, t, f), (total, count, peak) in coarse.items():
        children = [slot for (cs, ct, cf), slot in fine.items()
                    if cs == s and cf == f and t <= ct < t + 120_000]
        assert sum(c[1] for c in children) == count
        assert sum(c[0] for c in children) == pytest.approx(total, rel=1e-12)
        assert max(c[2] for c in children) == peak
        # avg merges by count weighting, exactly:
        merged_avg = sum(c[0] for c in children) / sum(c[1] for c in children)
        assert merged_avg == pytest.approx(total / count, rel=1e-12)
    master.close()


def test_rebuild_determinism(tmp_path):
    rng = np.random.default_rng(9)
    envs = [psd_env(seq=i, t0=int(rng.integers(0, 600_000)),
                    bins=list(rng.exponential(1e-9, size=8)))
            for i in range(300)]
    master = MasterStore(tmp_path)
    master.compact(envs)
    t1 = build_aggregates(master, levels=[LEVEL_60S_100K])
    t2 = build_aggregates(master, levels=[LEVEL_60S_100K])
    assert t1 == t2
    master.close()


def test_query_ordering_completeness_and_bucket_arithmetic(tmp_path):
    master = MasterStore(tmp_path)
    envs = []
    seq = 0
    for t0 in (0, 61_000):
        for fc in (450e6, 650e6):
            envs.append(psd_env(seq=seq, t0=t0, fc=fc,
                                bins=[1e-9] * 256, bin_width=9375.0))
            seq += 1
    master.compact(envs)
    store = AggregateStore(tmp_path / "agg")
    store.publish(build_aggregates(master, levels=[LEVEL_60S_1M]))

    cells = store.query("sn-a", 0, 120_000, 400e6, 800e6, LEVEL_60S_1M, "avg")
    keys = [(c.t_start_ms, c.f_start_hz) for c in cells]
    assert keys == sorted(keys)
    # Conservation: every master bin lands in exactly one cell, except the
    # window-edge guard bins (5 of 256 here: Nyquist + 2 per edge).
    assert sum(c.count for c in cells) == 4 * 251

    # Range before any data is empty, not an error.
    assert store.query("sn-a", -10_000, -1, 400e6, 800e6,
                       LEVEL_60S_1M, "avg") == []
    with pytest.raises(NoSuchView):
        store.query("sn-a", 0, 1, 0, 1, (1234, 5e3), "avg")

    # 400-800 MHz at 1 MHz resolution: 400 possible buckets per time bucket.
    f_buckets = {c.f_start_hz for c in cells}
    assert min(f_buckets) >= 400e6 and max(f_buckets) < 800e6
    assert (800e6 - 400e6) / 1e6 == 400
    master.close()


def test_aggregate_store_reload_from_disk(tmp_path):
    master = MasterStore(tmp_path / "m")
    master.compact([psd_env(seq=0, t0=0, bins=[2.0], bin_width=100e3)])
    store = AggregateStore(tmp_path / "agg")
    store.publish(build_aggregates(master, levels=[LEVEL_60S_100K]))
    reloaded = AggregateStore(tmp_path / "agg")
    assert reloaded.levels() == [LEVEL_60S_100K]
    cells = reloaded.query("sn-a", 0, 60_000, 0, 1e9, LEVEL_60S_100K, "avg")
    assert len(cells) == 1 and cells[0].value_mw == 2.0
    master.close()
