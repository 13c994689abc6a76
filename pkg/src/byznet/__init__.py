"""Asynchronous Byzantine agreement on incomplete communication graphs:
graph tooling, a deterministic discrete-event simulator, the three-layer
protocol stack (purify / reliable broadcast / phased agreement), Byzantine
strategies, and an experiment harness."""

from .adversary import AdversarySpec
from .agreement import AgreementMachine, Decision
from .graph import (
    CutPartition,
    Topology,
    build_double_cover,
    gen_topology,
    max_disjoint_paths,
    vertex_connectivity,
)
from .harness import RunConfig, load_config, run_suite, run_trial, scenario
from .purify import FloodEnvelope, PurifyLayer
from .rbcast import BroadcastLayer, ProtocolMessage
from .simnet import Envelope, Simulator, make_policy
from .stack import NodeStack

__all__ = [
    "AdversarySpec",
    "AgreementMachine",
    "BroadcastLayer",
    "CutPartition",
    "Decision",
    "Envelope",
    "FloodEnvelope",
    "NodeStack",
    "ProtocolMessage",
    "PurifyLayer",
    "RunConfig",
    "Simulator",
    "Topology",
    "build_double_cover",
    "gen_topology",
    "load_config",
    "make_policy",
    "max_disjoint_paths",
    "run_suite",
    "run_trial",
    "scenario",
    "vertex_connectivity",
]

__version__ = "0.1.0"
