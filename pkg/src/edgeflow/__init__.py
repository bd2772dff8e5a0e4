"""Replicated dataflow over join-semilattice CRDTs, with a gossip simulator."""

from edgeflow.causality import CausalContext, Dot, VersionVector
from edgeflow.dataflow import DataflowGraph, Derived, Input
from edgeflow.lattice import GCounter, GSet, LWWRegister, ORSet, PNCounter, bottom, join, leq
from edgeflow.sim import NetworkModel, Partition, ScriptedUpdate, SimConfig, Simulation, sim_run

__all__ = [
    "CausalContext", "DataflowGraph", "Derived", "Dot", "GCounter", "GSet", "Input",
    "LWWRegister", "NetworkModel", "ORSet", "PNCounter", "Partition", "ScriptedUpdate",
    "SimConfig", "Simulation", "VersionVector", "bottom", "join", "leq", "sim_run",
]
