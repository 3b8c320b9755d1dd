from dotenv import load_dotenv
import os

load_dotenv()


class CacheSetting:
    def __init__(self):
        self.directory = os.getenv("DECAY_CACHE_DIR", ".decay_cache")
        self.enabled = os.getenv("DECAY_CACHE_ENABLED", "true").strip().lower() in ("1", "true", "yes")
