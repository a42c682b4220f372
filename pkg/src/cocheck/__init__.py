"""Timed contract checking: C-O diagrams compiled to decorated timed automata,
with trace evaluation, consistency, conformance and a permission preorder."""

from importlib import resources

from .analysis import (
    ContractInconsistent, NetworkImpl, NotConformant, PreorderResult, TraceSet, Verdict,
    check_conformance, check_consistency, compare_permissions, parse_traces,
)
from .compiler import CompilationUnit, CompileError, compile_contract, default_horizon
from .diagram import (
    ContractDiagram, DiagramError, DSLSyntaxError, NormIndex, load_diagram, norm_index,
    parse_diagram, print_diagram, validate_diagram,
)
from .nta import FormatError, Network, load_network, read_network, write_network
from .traces import (
    HorizonTooSmall, TimedTrace, TraceClass, TraceEvaluation, TraceNotInNetwork, UnknownAction,
    classify_trace, enumerate_maximal_traces, hide_trace, run_trace,
)


def sample_path(name):
    """Filesystem path of a bundled sample file (e.g. ``payment_shipment.cod``)."""
    return str(resources.files(__name__).joinpath("samples", name))


__all__ = [n for n in dir() if not n.startswith("_") and n != "resources"]
