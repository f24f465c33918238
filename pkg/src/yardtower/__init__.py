"""Control tower, broker, agent runtime and reference microservices for
automating vehicles in delimited areas."""

from .tower import Tower, TowerConfig, TowerServer

__version__ = "0.1.0"

__all__ = ["Tower", "TowerConfig", "TowerServer", "__version__"]
