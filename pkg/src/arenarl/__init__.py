"""arenarl: hybrid imitation + Q-learning laboratory for a 2D arena shooter."""

__version__ = "0.1.0"
