"""Vehicular fog computing lab.

Simulates vehicle/fog interactions over mobility traces, trains a fog
classifier and a cost forecaster from scratch, and plans proactive
handovers along planned trajectories.
"""

__version__ = "0.1.0"
