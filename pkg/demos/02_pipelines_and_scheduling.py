"""Sensor output rates, IQ codecs, and bursty-band hop prioritization."""

import numpy as np

from spectrumlab import (
    Bursty,
    Emitter,
    Scene,
    ScanState,
    SensorConfig,
    estimate_output_rate,
    iq_decode,
    iq_pipeline,
    iq_rate_bps,
    next_hop,
    storage_bytes,
    sweep_time_s,
    synthesize_block,
    update_burstiness,
    psd_pipeline,
)

# -- rate arithmetic ---------------------------------------------------------

cfg = SensorConfig()
print(f"default PSD config: fft {cfg.fft_size}, dwell {cfg.dwell_ms} ms")
print(f"  wire rate        = {estimate_output_rate(cfg) / 1e3:6.1f} Kb/s")
print(f"  60 sensors/month = {storage_bytes(50e3, 60, 30) / 1e12:.3f} TB at 50 Kb/s")
print(f"  raw IQ at 2.4 MHz: {iq_rate_bps(2.4e6, 'none') / 1e6:.1f} Mb/s, "
      f"8-bit codec {iq_rate_bps(2.4e6, 'int8') / 1e6:.1f} Mb/s")
print(f"  TV-band sweep at 250 ms dwell: "
      f"{sweep_time_s(400e6, 800e6, 2.4e6, 250):.2f} s")

# -- IQ codecs ------------------------------------------------------------------

scene = Scene(emitters=(Emitter(600e6, 0.5e6, 1e-7),), noise_density=1e-12,
              rng_seed=7)
block = synthesize_block(scene, "demo", 600e6, 2.4e6, 4096, 0)
for codec in ("none", "lossless-zip", "int8"):
    msg = iq_pipeline(block, codec)
    rt = iq_decode(msg)
    exact = np.array_equal(rt, np.asarray(block.samples).astype(np.complex64))
    print(f"  codec {codec:13s}: payload {len(msg.payload):6d} B, "
          f"bit-exact round-trip: {exact}")

# -- bursty-weighted scheduling ----------------------------------------------------

print("\nA bursty emitter pulls visits toward its hop:")
burst_scene = Scene(
    emitters=(Emitter(604.8e6, 1e6, 5e-6,
                      activity=Bursty(mean_on_ms=300, mean_off_ms=300, seed=3)),),
    noise_density=1e-12, rng_seed=8)
state = ScanState.for_band(600e6, 612e6, 2.4e6, strategy="bursty-weighted")
t = 0.0
for step in range(600):
    freq = next_hop(state)
    b = synthesize_block(burst_scene, "demo", freq, 2.4e6, 1024, int(t))
    update_burstiness(state, psd_pipeline(b, 256, 4))
    t += 125.0
for hop, visits, score in zip(state.hop_list, state.visit_counts,
                              state.burstiness):
    bar = "#" * (visits // 10)
    print(f"  {hop / 1e6:6.1f} MHz: {visits:4d} visits "
          f"(score {score:.2e}) {bar}")
