from . import evaluation, tools, training

__all__ = ["evaluation", "tools", "training"]
