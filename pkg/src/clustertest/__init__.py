"""Sublinear testers for cluster structure in graphs, with the generators,
reductions and lower-bound game needed to exercise them."""

from .graph import FAIL, Graph, GraphOracle, QueryLedger, conductance, load_graph, dump_graph
from .tester import BudgetExceeded, ParameterError, TesterParams, TestVerdict, compute_params, partition_test

__all__ = [
    "FAIL",
    "Graph",
    "GraphOracle",
    "QueryLedger",
    "conductance",
    "load_graph",
    "dump_graph",
    "BudgetExceeded",
    "ParameterError",
    "TesterParams",
    "TestVerdict",
    "compute_params",
    "partition_test",
]
