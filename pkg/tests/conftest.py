"""Suite-wide hypothesis profile: deterministic, no deadline."""

from hypothesis import settings

settings.register_profile("suite", deadline=None, derandomize=True, max_examples=25)
settings.load_profile("suite")
