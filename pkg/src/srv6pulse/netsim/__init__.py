from .config import (
    MS,
    SEC,
    Component,
    ConfigError,
    Delay,
    LinkConfig,
    NodeConfig,
    OverlappingWindow,
    SessionConfig,
    SimConfig,
    StressProfile,
    TrafficFlow,
    config_from_dict,
    config_to_dict,
    default_cpu_stress,
    inject_failure,
    two_node_config,
    validate,
)
from .sim import CampaignReport, FrrRecord, LinkCounters, RoleStats, SessionReport, run, verify_frr

__all__ = [
    "MS",
    "SEC",
    "Component",
    "ConfigError",
    "Delay",
    "LinkConfig",
    "NodeConfig",
    "OverlappingWindow",
    "SessionConfig",
    "SimConfig",
    "StressProfile",
    "TrafficFlow",
    "config_from_dict",
    "config_to_dict",
    "default_cpu_stress",
    "inject_failure",
    "two_node_config",
    "validate",
    "CampaignReport",
    "FrrRecord",
    "LinkCounters",
    "RoleStats",
    "SessionReport",
    "run",
    "verify_frr",
]
