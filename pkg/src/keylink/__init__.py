"""Key linking: derive resource keys from one another to cut per-user key storage."""

__version__ = "0.1.0"
