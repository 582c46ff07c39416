"""Figure rendering for simulator run directories."""

__version__ = "0.1.0"

from .figures import (
    FigureSpec,
    MalformedCsv,
    MissingSnapshot,
    RenderResult,
    render_run,
)

__all__ = ["FigureSpec", "RenderResult", "render_run", "MissingSnapshot",
           "MalformedCsv", "__version__"]
