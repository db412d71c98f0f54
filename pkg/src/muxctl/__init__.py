"""Multiplexed control of superconducting qubits.

Circuit compilation into pulse-shape-invariant cycles, a frequency
multiplexer model, closed-system leakage and coupler-gate simulators, and
wiring/heat-load arithmetic.
"""

__version__ = "0.1.0"
