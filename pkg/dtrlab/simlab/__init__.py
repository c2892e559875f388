"""Simulation settings and their known optimal regimes."""
from dtrlab.simlab.oracle import OracleRule, oracle_rule
from dtrlab.simlab.settings import DIMENSIONS, generate, mc_value, setting_one_law

__all__ = ["DIMENSIONS", "OracleRule", "generate", "mc_value", "oracle_rule", "setting_one_law"]
