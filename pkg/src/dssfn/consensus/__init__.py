"""Edge-consensus ADMM for layer-wise decentralized training."""
from .engine import (
    TRACE_HEADER,
    EventTrace,
    LayerConsensusResult,
    TraceEvent,
    consensus_error,
    dual_residual,
    run_layer_consensus,
)
from .mailbox import Mailbox, Message
from .node import (
    GammaBoundWarning,
    NodeSolveError,
    NodeState,
    NodeUpdate,
    SolverConfig,
    gamma_bound,
    make_node_states,
    node_update,
)
from .parallel import run_layer_consensus_threaded
from .training import DecentralizedModel, average_iterates, train_decentralized

__all__ = [
    "TRACE_HEADER",
    "EventTrace",
    "LayerConsensusResult",
    "TraceEvent",
    "consensus_error",
    "dual_residual",
    "run_layer_consensus",
    "run_layer_consensus_threaded",
    "Mailbox",
    "Message",
    "GammaBoundWarning",
    "NodeSolveError",
    "NodeState",
    "NodeUpdate",
    "SolverConfig",
    "gamma_bound",
    "make_node_states",
    "node_update",
    "DecentralizedModel",
    "average_iterates",
    "train_decentralized",
]
