"""Asynchronous federated learning with versioned branch models, simulated on a virtual clock."""

from .orchestrator import RunConfig, RunReport, run, run_fedasync, run_fedavg, run_gitfl

__all__ = ["RunConfig", "RunReport", "run", "run_gitfl", "run_fedavg", "run_fedasync"]
