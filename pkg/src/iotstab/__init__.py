"""Stability and delay of massive-uplink IoT networks.

Stochastic-geometry success probabilities coupled to Geo/PH/1 queues for
baseline, power-ramping and backoff random access, with a spatiotemporal
Monte Carlo simulator for cross-checking.
"""

__version__ = "0.1.0"
