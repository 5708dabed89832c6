"""Online integration of multi-source event snippets into evolving stories."""

from .errors import StoryweaveError, ValidationError
from .model import DimensionConfig, EngineConfig, Metric, Mode, Sketch, Snippet, window_of
from .pipeline import Engine, IngestReport, run

__all__ = [
    "DimensionConfig",
    "Engine",
    "EngineConfig",
    "IngestReport",
    "Metric",
    "Mode",
    "Sketch",
    "Snippet",
    "StoryweaveError",
    "ValidationError",
    "run",
    "window_of",
]
__version__ = "0.1.0"
