"""
Scenario loading shared by every rdslc command.
"""
