"""Numerical core of the matrix concentration lab."""
