"""
Output emitters: schedule configuration, Gantt charts and comparison reports.
"""
