"""Scenario case modules."""
