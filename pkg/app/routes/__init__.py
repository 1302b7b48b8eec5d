from .commands import COMMANDS, dispatch

__all__ = ["COMMANDS", "dispatch"]
