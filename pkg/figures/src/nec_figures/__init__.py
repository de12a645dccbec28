"""Plotting layer for nec-lab CSV outputs; no physics is recomputed here."""

__version__ = "0.1.0"

from .recipes import EmptyInput, FigureRecipe, MissingColumn  # noqa: F401
from .render import render  # noqa: F401
