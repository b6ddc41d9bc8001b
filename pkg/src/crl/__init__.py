"""Compositional recursive learner: a controller that composes reducer and translator modules."""
__version__ = "0.1.0"
