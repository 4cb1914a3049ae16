from .numeric import round_half_away

__all__ = ["round_half_away"]
