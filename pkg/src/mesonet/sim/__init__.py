from .config import ConfigError, SimConfig, from_mapping
from .engine import PacketRecord, SimResult, Simulator, run
from .metrics import (Metrics, conservation, evaluate_selector, metrics_csv, overhead_fraction, paired_throughput,
                      to_dataset, trace_csv)
