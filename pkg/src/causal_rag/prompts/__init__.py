"""Packaged prompt catalog files."""
