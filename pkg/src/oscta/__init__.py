"""Output-sensitive constant-time analysis for a While language and a small IR."""

__version__ = "0.1.0"
