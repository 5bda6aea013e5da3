from .experiments import (ExperimentConfig, aggregate_table, run_experiment, run_one,
                          table_csv, write_experiment)

__all__ = ["ExperimentConfig", "aggregate_table", "run_experiment", "run_one", "table_csv",
           "write_experiment"]
