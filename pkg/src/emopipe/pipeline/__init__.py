"""Runnable pipeline workers and the process orchestrator."""

from .orchestrate import Orchestrator, PipelineConfig, default_endpoints, orchestrate
from .sources import (CaptureSource, ImageDirectory, LandmarkExtractor, LandmarkReplay,
                      LookupExtractor, SyntheticStream)
from .workers import (ControllerStats, controller_run, format_emotion, input_run,
                      model_run, read_trace, view_run)

__all__ = [
    "Orchestrator", "PipelineConfig", "default_endpoints", "orchestrate",
    "CaptureSource", "ImageDirectory", "LandmarkExtractor", "LandmarkReplay",
    "LookupExtractor", "SyntheticStream", "ControllerStats", "controller_run",
    "format_emotion", "input_run", "model_run", "read_trace", "view_run",
]
