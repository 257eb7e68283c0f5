"""Elasticity of two blocks joined by a thin layer of thin beams, its
interface-spring limit and the tools connecting the two."""

__version__ = "0.1.0"
