"""DDCSieve management commands."""
