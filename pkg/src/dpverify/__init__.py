"""Explicit-state verification of message-passing process models.

Processes are action-labeled control graphs exchanging values over FIFO
channels; a distributed process interleaves them one atomic edge label at a
time.  The explorer enumerates every reachable global state and checks
deadlock freedom, termination (acyclicity) and user-supplied invariants.
The bundled manager/worker row-distribution model is the flagship case
study; the .dp text format makes new models cheap to write.
"""

from .explorer import (
    Bounds, CycleWitness, ExplorationResult, FinalVerdict,
    InitialConditionUnsatisfiable, InvariantSpec, InvariantViolation,
    PredicateEvaluationError, check_final_spec, check_invariants,
    detect_cycles, dfs_find_cycle, explore, graphs_isomorphic, kahn_has_cycle,
    scoped_overlap_events,
)
from .matmul import (
    InvalidParams, MatmulParams, MUTATIONS, NUMERIC, SYMBOLIC, build_augmented,
    build_mutant, build_plain, inputs_for, message_shape_suite, theorem1_suite,
)
from .process import (
    Action, Assign, Diagnostic, Edge, Guard, INTERNAL, MalformedAction,
    RECEIVING, Recv, ReductionInapplicable, RenameClash, Renaming, SENDING,
    SeqProcess, Send, classify, reduce, rename, validate,
)
from .semantics import (
    DEADLOCK, DistributedProcess, DpState, LIVE, MissingInput, TERMINAL,
    Transition, classify_state, erase_aux, initial_states, make_dp, state_key,
    step_action, step_elementary, successors,
)
from .terms import (
    BOOL, BROADCAST, Binding, BoolV, CHAN, ChanV, ChannelId, ConcreteMatrix,
    ConcreteRow, Const, EvaluationError, Index, MATRIX, MatrixAtom, ModelError,
    NAT, NatV, Queue, ROW, RowAtom, STAR, SetV, Term, TupleV, TypeMismatch,
    TypeTag, UnboundVariable, Value, Var, app, array_type, boolc, compose,
    eval_term, make_nat_set, make_set, nat, set_type, substitute, value_key,
    vars_of,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
