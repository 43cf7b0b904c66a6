"""Tools for Estonian grammatical error correction: M2 scoring, n-gram
spelling correction, synthetic error generation and POS-context checks."""

__version__ = "0.1.0"
