"""Discrete-event simulator for energy-aware wireless sensor networks.

Free-space channel, SNIR-based packet reception, state-based energy
accounting, waypoint mobility and a TDMA beacon / RSSI read-out application.
"""

__version__ = "0.1.0"
