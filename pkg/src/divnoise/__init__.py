"""Exact discrete noise samplers and their privacy/utility analysis."""
