"""Testing suite for the :mod:`mnarlbm` package and submodules."""
