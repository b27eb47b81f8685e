"""Asynchronous multi-tree maintenance for peer-to-peer streaming overlays."""

from ._jit import BACKEND
from .graph import INFINITY, SERVER, GraphState, LinkError, build_link, remove_link, true_depths
from .protocol import DepthMode, Rule, RuleOutcome, on_sample
from .sim import ConfigError, DegreeProfile, SimConfig, Simulation, run

__version__ = "0.1.0"
