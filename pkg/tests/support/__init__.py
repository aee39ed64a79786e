"""Shared test support for integration and scenarios."""
