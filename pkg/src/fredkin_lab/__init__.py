"""Numerical toolkit for the Fredkin spin chain and its lattice-path Markov chains."""

__version__ = "0.1.0"

from .combinatorics import CapExceeded, catalan  # noqa: E402

__all__ = ["__version__", "CapExceeded", "catalan"]
