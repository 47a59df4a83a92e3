"""Irregular repetition slotted ALOHA with random transmit power levels."""
from .model import (LIVA, ConfigError, EdgePerspectiveDistribution, PowerModel,
                    RepetitionDistribution, SystemConfig, edge_perspective, eval_poly,
                    slot_occupancy_pmf)

__all__ = ["LIVA", "ConfigError", "EdgePerspectiveDistribution", "PowerModel",
           "RepetitionDistribution", "SystemConfig", "edge_perspective", "eval_poly",
           "slot_occupancy_pmf"]
__version__ = "0.1.0"
