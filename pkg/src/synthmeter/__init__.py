"""synthmeter: fidelity, utility and privacy evaluation for synthetic
half-hourly electricity load profiles."""

__version__ = "0.1.0"
