"""Domain dataclasses shared by the imaging modules."""
