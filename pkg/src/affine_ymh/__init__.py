"""Numerical Yang-Mills-Higgs metrics on flat Higgs bundles over affine tori."""

__version__ = "0.1.0"
