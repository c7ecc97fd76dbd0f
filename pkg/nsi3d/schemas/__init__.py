"""Pydantic schemas for experiment configuration files."""
