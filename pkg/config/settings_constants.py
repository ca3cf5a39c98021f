DEFAULTS = {
    "solver_seed": 0,
    "solver_restarts": 4,
    "solver_iterations": 600,
    "solver_initial_temperature": 50.0,
    "solver_cooling": 0.995,
    "solver_time_budget": 60.0,
    "solver_workers": None,
    "verify_periods": 1000,
    "verify_seeds": 1,
    "guard_action_cost": 10,
    "max_call_depth": 32,
    "period_variable": "modem_period",
    "gantt_columns": 80,
    "svg_lane_height": 24,
    "svg_chart_width": 960,
    "log_level": "WARNING",
}

# Manifest `solver:` keys and the settings they override
SOLVER_KEYS = {
    "seed": "solver_seed",
    "restarts": "solver_restarts",
    "iterations": "solver_iterations",
    "initial_temperature": "solver_initial_temperature",
    "cooling": "solver_cooling",
    "time_budget": "solver_time_budget",
    "workers": "solver_workers",
}
