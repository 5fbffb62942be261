"""Learning-and-scheduling laboratory for the empirical cmu rule."""

__version__ = "1.0.0"
