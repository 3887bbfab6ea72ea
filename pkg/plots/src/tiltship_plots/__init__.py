"""Figure rendering for tiltship run logs."""

from .figures import FIGURE_KINDS, FigureSpec, MissingColumnError, load_log, render

__version__ = "0.1.0"
