"""
rdslc configuration package.
"""
# Import only specific names actually defined in data.py
from .data import APP_NAME, CONFIG_FILE, TOOL_VERSION
