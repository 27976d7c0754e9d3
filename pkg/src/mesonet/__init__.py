"""Dual-radio (Zigbee mesh + LoRa) radio-selection simulator and learning toolkit."""

__version__ = "0.1.0"
