"""Individual alpha-returns to scale estimation on generalized FDH technologies."""

__version__ = "0.1.0"
