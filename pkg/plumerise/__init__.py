"""
Plume rise measurement from smokestack plume segmentation masks.
"""
from plumerise.config import APP_CONFIG

__version__ = APP_CONFIG["version"]
