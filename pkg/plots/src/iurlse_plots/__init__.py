from .render import FigureSpec, RenderError, load_series, render

__all__ = ["FigureSpec", "RenderError", "load_series", "render"]
