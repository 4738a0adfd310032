"""Movement-intent recognition from dyadic force and velocity recordings."""

__version__ = "0.1.0"
