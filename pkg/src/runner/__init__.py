"""
Ejecución de escenarios: esquemas de entrada, reportes y lotes.
"""

from src.runner.scenario_runner import (
    HANDLERS,
    batch,
    check_identities,
    cm_simulate,
    exit_code_for,
    load_reports,
    load_scenarios,
    run,
    run_scenario,
    write_results,
)
from src.runner.schemas import (
    BatchSummary,
    ResidualEntry,
    ResidualReport,
    Scenario,
    ScenarioKind,
    SummaryRow,
)

__all__ = [
    "HANDLERS",
    "batch",
    "check_identities",
    "cm_simulate",
    "exit_code_for",
    "load_reports",
    "load_scenarios",
    "run",
    "run_scenario",
    "write_results",
    "BatchSummary",
    "ResidualEntry",
    "ResidualReport",
    "Scenario",
    "ScenarioKind",
    "SummaryRow",
]
