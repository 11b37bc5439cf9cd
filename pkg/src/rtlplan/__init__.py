"""Verification-data and RL-signal toolkit for a small synthesizable Verilog subset."""

__version__ = "0.1.0"
