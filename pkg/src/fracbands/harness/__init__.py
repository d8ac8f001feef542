"""Sweep configuration, execution, persistence and reporting."""
from .config import SweepPlan, load_config, parse_config
from .records import SCHEMA_VERSION, RunRecord, export, read_record, read_records, write_record
from .sweep import run_sweep, solve_cell

__all__ = ["SCHEMA_VERSION", "RunRecord", "SweepPlan", "export", "load_config", "parse_config",
           "read_record", "read_records", "run_sweep", "solve_cell", "write_record"]
