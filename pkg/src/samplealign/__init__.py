"""Distributed multiple sequence alignment by k-mer rank sampling."""

__version__ = "0.1.0"
