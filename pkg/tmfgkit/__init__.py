"""Planar filtering of dense weight matrices: TMFG variants, PMFG, validators and generators."""

__version__ = "0.1.0"
