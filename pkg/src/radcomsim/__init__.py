"""Cooperative multistatic OFDM radar-communication network simulator."""

__version__ = "0.1.0"

SPEED_OF_LIGHT = 299_792_458.0
