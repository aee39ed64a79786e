"""Pytest integration test entrypoints."""
