"""Synthetic full-order plants and episode machinery."""

from .base import PlantState, plant_step
from .convective import ConvectivePlant, ConvectivePlantConfig
from .episode import (EpisodeRecord, EpisodeSchedule, impulse_response, load_episode,
                      run_episode, save_episode)
from .forcing import ForcingShape, forcing_field, forcing_vector
from .linear import LinearPlant
from .wake import WakePlant, WakePlantConfig

__all__ = [
    "PlantState", "plant_step", "ConvectivePlant", "ConvectivePlantConfig", "EpisodeRecord",
    "EpisodeSchedule", "impulse_response", "load_episode", "run_episode", "save_episode",
    "ForcingShape", "forcing_field", "forcing_vector", "LinearPlant", "WakePlant",
    "WakePlantConfig",
]
