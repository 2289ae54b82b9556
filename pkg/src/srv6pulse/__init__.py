"""SRv6 bidirectional liveness probing with TI-LFA fast reroute, plus a simulator."""

__version__ = "0.1.0"
