from .figures import (KINDS, TRACE_COLUMNS, FiggenError, FigureSpec,
                      build_figure, render)

__all__ = ["KINDS", "TRACE_COLUMNS", "FiggenError", "FigureSpec",
           "build_figure", "render"]
