"""DDCSieve tests."""
