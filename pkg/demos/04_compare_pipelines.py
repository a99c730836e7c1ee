"""
Comparing the three pipelines
=============================

Script-based, naive planner and constrained planner, scored on replay,
trace completeness, failure visibility and run-to-run variance.
"""

from provenact.metrics import SuiteConfig, format_table, matches_expected, run_experiment_suite

rows = run_experiment_suite(SuiteConfig(runs=5))
print(format_table(rows))
print("matches expected table:", matches_expected(rows))
