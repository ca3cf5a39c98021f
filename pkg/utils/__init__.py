"""
rdslc utilities package.
Terminal colours and small file helpers shared by the CLI and emitters.
"""
