"""Figure rendering for smile tables produced by the roughsabr CLI."""

from .render import main, render_figure

__all__ = ["main", "render_figure"]
