"""spectrumlab: desk-scale crowdsourced spectrum monitoring.

Simulated low-cost sensors run real PSD/IQ pipelines over a synthetic RF
scene; a control plane dispatches measurement campaigns over pub-sub; a
lambda-style backend (durable queue, immutable master dataset + batch
aggregates, 5 s speed windows) serves fused spectrum data through an
access-controlled query and streaming API, with white-space and RSSI
analytics on top.
"""

from .aggregation import Cell, coarsen
from .analytics import (
    CalibrationProfile,
    OccupancyMap,
    calibrated_rssi,
    capture_fraction,
    detect_whitespace,
    occupancy,
)
from .batch import AggregateStore, MasterStore, build_aggregates
from .broker import Broker
from .control import (
    Campaign,
    CampaignManager,
    Command,
    SensorRegistry,
    apply_command,
    haversine_km,
    obfuscate_location,
)
from .errors import (
    InvalidArgument,
    NotFound,
    NoSuchView,
    OutOfRetention,
    PermissionDenied,
    SpectrumLabError,
    StateError,
    Unavailable,
)
from .ingest import CollectorClient, CollectorServer, PartitionedLog
from .node import SensorNode
from .runtime import LocalStack, SimClock
from .scene import (
    AlwaysOn,
    Bursty,
    Emitter,
    Periodic,
    SampleBlock,
    Scene,
    expected_psd,
    load_scene,
    save_scene,
    synthesize_block,
)
from .sensor import (
    GainMeta,
    IqMessage,
    PsdSegment,
    ScanState,
    SensorConfig,
    estimate_output_rate,
    iq_decode,
    iq_pipeline,
    iq_rate_bps,
    next_hop,
    plan_hops,
    psd_pipeline,
    storage_bytes,
    sweep_time_s,
    update_burstiness,
)
from .serving import QuerySpec, ServingLayer, TokenAuth
from .speed import SpeedLayer
from .units import dbm_to_mw, mw_to_dbm
from .wire import Envelope, envelope_from_iq, envelope_from_segment

__version__ = "0.1.0"
