"""Multimodal analytics for immersive teacher-simulation session logs."""

__version__ = "0.1.0"
