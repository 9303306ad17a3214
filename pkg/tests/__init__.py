"""A simple init file."""
