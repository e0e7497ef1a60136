"""open-intake: headless open-input content intake with a moderation queue."""

__version__ = "0.1.0"
