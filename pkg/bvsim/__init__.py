"""Just an empty init file."""
