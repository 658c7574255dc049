"""URLLC/eMBB coexistence scheduling for downlink MIMO-NOMA."""

__version__ = "0.1.0"
