from .pole_cache import PoleCache, config_hash
