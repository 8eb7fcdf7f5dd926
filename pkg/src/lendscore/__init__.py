"""Two-stage P2P loan scoring: a wide-and-deep PD gate, then IRR regression."""

__version__ = "0.1.0"
