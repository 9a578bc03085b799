from sketchmon.pipeline.queues import POISON, QueueClosed, QueueStats, WorkQueue
from sketchmon.pipeline.metrics import (
    LatencyHistogram,
    MetricsServer,
    PipelineMetrics,
    ThroughputStats,
    compute_tpr,
)
from sketchmon.pipeline.workers import (
    DetectionResult,
    Pipeline,
    PipelineItem,
    WorkerPool,
    detect_worker_step,
    render_worker_step,
)

__all__ = [
    "DetectionResult",
    "LatencyHistogram",
    "MetricsServer",
    "POISON",
    "Pipeline",
    "PipelineItem",
    "PipelineMetrics",
    "QueueClosed",
    "QueueStats",
    "ThroughputStats",
    "WorkQueue",
    "WorkerPool",
    "compute_tpr",
    "detect_worker_step",
    "render_worker_step",
]
