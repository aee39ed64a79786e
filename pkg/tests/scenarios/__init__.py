"""Pytest scenario test entrypoints."""
