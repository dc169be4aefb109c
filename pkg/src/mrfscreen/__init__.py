"""Learning continuous pairwise Markov random fields by interaction screening."""
__version__ = "0.1.0"
