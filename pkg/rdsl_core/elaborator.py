"""
Elaborator - Flattens grounded flows into a one-period task graph

Index ranges expand into instances, flow calls inline recursively, modifier
calls become tasks and every stream splits into per-index buffers. A stream
reference is a root stream plus an index prefix: producers write every leaf
under their prefix, consumers read every produced key comparable with it.
"""

import itertools
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from loguru import logger

from utils.colors import Colors

from .errors import (
    CallDepthExceeded,
    DanglingConsumer,
    DoubleDefine,
    RdslError,
    RecursiveFlow,
    ShapeMismatch,
    UnboundDimension,
    UnboundIndex,
    UnboundSymbol,
    UnknownCallee,
    UnknownFunction,
)
from .expr import Expr, Var, eval_expr, format_expr
from .frontend import (
    AssignEmpty,
    CallStmt,
    Direction,
    ErrorMessage,
    FlowDef,
    FunctionCall,
    GuardArm,
    GuardKind,
    ModifierDef,
    SourceUnit,
    StreamRef,
    split_call_args,
)
from .graph import BufferInstance, External, InputRef, TaskGraph, TaskInstance, build_graph, buffer_id
from .platform import PlatformDesc
from .sdk import GroundedMeta, SdkCatalog
from .symbols import SymbolTable

DEFAULT_MAX_DEPTH = 32

Key = Tuple[int, ...]


@dataclass(frozen=True)
class RootStream:
    name: str
    dims: Tuple[int, ...]
    direction: Direction = Direction.INTERNAL
    top: bool = False
    label: Optional[str] = None

    @property
    def is_source(self) -> bool:
        return self.top and self.direction is Direction.IN

    @property
    def is_sink(self) -> bool:
        return self.top and self.direction is Direction.OUT

    def leaves(self, prefix: Key) -> List[Key]:
        if len(prefix) >= len(self.dims):
            return [prefix]
        rest = [range(1, d + 1) for d in self.dims[len(prefix):]]
        return [prefix + tail for tail in itertools.product(*rest)]


@dataclass(frozen=True)
class Slice:
    root: str
    prefix: Key = ()
    delay: int = 0


@dataclass(frozen=True)
class GuardLowering:
    """A modifier reduced to what scheduling and replay need."""

    meta: GroundedMeta
    optional_params: FrozenSet[str]
    runtime: int
    arms: Tuple[GuardArm, ...]
    arm_costs: Tuple[int, ...]


@dataclass
class _PendingTask:
    id: str
    modifier: ModifierDef
    lowering: GuardLowering
    params: Dict[str, Tuple[Slice, Direction, str]]
    index_args: Tuple[int, ...]


def comparable(a: Key, b: Key) -> bool:
    """One key is a prefix of the other."""
    n = min(len(a), len(b))
    return a[:n] == b[:n]


def lower_guards(modifier: ModifierDef, catalog: SdkCatalog) -> GuardLowering:
    """Derive task metadata and the worst-case runtime over all guard arms.

    Patterns are the intersection of the called functions' lists, in the
    first function's order; sizes are the maximum over functions.
    """
    functions: List[GroundedMeta] = []
    arm_costs = []
    for arm in modifier.arms:
        cost = 0
        for action in arm.actions:
            if isinstance(action, FunctionCall):
                meta = catalog.get(action.function)
                if meta is None:
                    raise UnknownFunction(action.function, modifier.name)
                if meta not in functions:
                    functions.append(meta)
                cost += meta.runtime
            elif isinstance(action, ErrorMessage):
                cost += catalog.error_message_cost
            elif isinstance(action, AssignEmpty):
                cost += catalog.assign_empty_cost
        arm_costs.append(cost)
    if not functions:
        raise UnknownFunction(f"<none in {modifier.name}>", modifier.name)
    shared = set(functions[0].available_patterns)
    for meta in functions[1:]:
        shared &= set(meta.available_patterns)
    patterns = tuple(p for p in functions[0].available_patterns if p in shared)
    meta = GroundedMeta(
        modifier.name,
        patterns,
        max(m.elementsize for m in functions),
        max(m.internalsize for m in functions),
        max(arm_costs),
    )
    optional = frozenset(
        arm.condition.stream for arm in modifier.arms if arm.condition.kind is not GuardKind.TRUE
    )
    return GuardLowering(meta, optional, max(arm_costs), modifier.arms, tuple(arm_costs))


class _Elaboration:
    def __init__(
        self,
        unit: SourceUnit,
        symbols: SymbolTable,
        catalog: SdkCatalog,
        arrivals: Mapping[str, int],
        max_depth: int,
    ):
        self.unit = unit
        self.symbols = symbols.values()
        self.catalog = catalog
        self.arrivals = arrivals
        self.max_depth = max_depth
        self.roots: Dict[str, RootStream] = {}
        self.writes: Dict[str, Dict[Key, str]] = {}
        self.pending: List[_PendingTask] = []
        self.lowerings: Dict[str, GuardLowering] = {}

    # ------------------------------------------------------------ helpers

    def _scope(self, env: Mapping[str, int]) -> Dict[str, int]:
        scope = dict(self.symbols)
        scope.update(env)
        return scope

    def _index(self, expr: Expr, env: Mapping[str, int], where: str) -> int:
        try:
            return eval_expr(expr, self._scope(env))
        except UnboundSymbol as exc:
            raise UnboundIndex(exc.name, where) from None

    def _dims(self, flow: FlowDef, decl, env: Mapping[str, int]) -> Tuple[int, ...]:
        dims = []
        for expr in decl.dims:
            try:
                value = eval_expr(expr, self._scope(env))
            except UnboundSymbol as exc:
                raise UnboundDimension(decl.name, f"'{exc.name}' is not bound in '{flow.name}'") from None
            if value < 1:
                raise UnboundDimension(decl.name, f"{format_expr(expr)} = {value}, dimensions start at 1")
            dims.append(value)
        return tuple(dims)

    def _resolve(self, ref: StreamRef, scope: Mapping[str, Slice], env: Mapping[str, int], where: str) -> Slice:
        if ref.name not in scope:
            raise RdslError(f"'{where}' uses undeclared stream '{ref.name}'", ref.pos)
        base = scope[ref.name]
        root = self.roots[base.root]
        prefix = list(base.prefix)
        for expr in ref.indices:
            value = self._index(expr, env, where)
            position = len(prefix)
            if value < 1 or (position < len(root.dims) and value > root.dims[position]):
                raise ShapeMismatch(
                    f"{ref.name}[{format_expr(expr)}]", root.name, f"index {value} out of range"
                )
            prefix.append(value)
        return Slice(base.root, tuple(prefix), base.delay + ref.delay)

    # ------------------------------------------------------------ walking

    def declare(self, flow: FlowDef, path: str, env: Mapping[str, int], top: bool, decls) -> Dict[str, Slice]:
        scope = {}
        for decl in decls:
            name = decl.name if top or not path else f"{path}/{decl.name}"
            root = RootStream(name, self._dims(flow, decl, env), decl.direction, top, decl.label)
            self.roots[name] = root
            scope[decl.name] = Slice(name)
        return scope

    def instantiate(
        self,
        flow: FlowDef,
        path: str,
        env: Dict[str, int],
        scope: Dict[str, Slice],
        stack: Tuple[str, ...],
    ) -> None:
        if len(stack) > self.max_depth:
            raise CallDepthExceeded(self.max_depth, path)
        counts: Dict[str, int] = {}
        for call in flow.body:
            counts[call.callee] = counts.get(call.callee, 0) + 1
        seen: Dict[str, int] = {}
        for call in flow.body:
            seen[call.callee] = seen.get(call.callee, 0) + 1
            ordinal = seen[call.callee] if counts[call.callee] > 1 else 0
            self.expand_call(flow, call, ordinal, path, env, scope, stack)

    def expand_call(self, flow, call: CallStmt, ordinal: int, path, env, scope, stack) -> None:
        callee_flow = self.unit.flow(call.callee)
        callee_mod = self.unit.modifier(call.callee)
        if callee_flow is None and callee_mod is None:
            raise UnknownCallee(call.callee, flow.name)
        if callee_flow is not None and callee_flow.name in stack:
            raise RecursiveFlow(stack + (callee_flow.name,))

        ranges = []
        for rng in call.ranges:
            lo = self._index(rng.lo, env, call.callee)
            hi = self._index(rng.hi, env, call.callee)
            ranges.append((rng.var, range(lo, hi + 1)))
        names = [var for var, _ in ranges]
        for values in itertools.product(*(r for _, r in ranges)):
            local_env = dict(env)
            local_env.update(zip(names, values))
            segment = call.callee + (f":{ordinal}" if ordinal else "") + "".join(f"[{v}]" for v in values)
            instance_path = f"{path}/{segment}" if path else segment
            index_args, stream_args = split_call_args(call, set(local_env))
            indices = tuple(self._index(Var(ref.name), local_env, call.callee) for ref in index_args)
            if callee_flow is not None:
                self.call_flow(callee_flow, call, instance_path, local_env, scope, stream_args, indices, stack)
            else:
                self.call_modifier(callee_mod, call, instance_path, local_env, scope, stream_args, indices)

    def _bind(self, formals: Sequence[str], call: CallStmt, stream_args, where: str) -> Dict[str, StreamRef]:
        bound: Dict[str, StreamRef] = {}
        for binding in call.bindings:
            if binding.formal not in formals:
                raise RdslError(f"'{where}' has no formal '{binding.formal}'", binding.pos or call.pos)
            bound[binding.formal] = binding.ref
        remaining = [f for f in formals if f not in bound]
        if len(stream_args) > len(remaining):
            raise RdslError(f"too many stream arguments for '{where}'", call.pos)
        for formal, ref in zip(remaining, stream_args):
            bound[formal] = ref
        for formal in formals:
            if formal not in bound:
                raise RdslError(f"formal '{formal}' of '{where}' is not bound", call.pos)
        return bound

    def call_flow(self, callee: FlowDef, call, path, env, scope, stream_args, indices, stack) -> None:
        if len(indices) > len(callee.formals):
            raise RdslError(f"'{callee.name}' takes {len(callee.formals)} index arguments, got {len(indices)}", call.pos)
        callee_env: Dict[str, int] = {}
        for position, formal in enumerate(callee.formals):
            if position < len(indices):
                callee_env[formal] = indices[position]
            elif formal in env:
                callee_env[formal] = env[formal]
            else:
                raise UnboundIndex(formal, callee.name)

        interface = [d.name for d in callee.interface]
        bound = self._bind(interface, call, stream_args, callee.name)
        callee_scope: Dict[str, Slice] = {}
        for decl in callee.interface:
            actual = self._resolve(bound[decl.name], scope, env, callee.name)
            if decl.direction is Direction.OUT and actual.delay:
                raise RdslError(f"'{callee.name}' cannot write the delayed reference bound to '{decl.name}'", call.pos)
            root = self.roots[actual.root]
            residual = root.dims[len(actual.prefix):]
            formal_dims = self._dims(callee, decl, callee_env)
            if formal_dims and len(formal_dims) < len(residual):
                raise ShapeMismatch(decl.name, root.name, f"rank {len(formal_dims)} < residual rank {len(residual)}")
            if formal_dims and len(formal_dims) == len(residual) and formal_dims != residual:
                raise ShapeMismatch(decl.name, root.name, f"dims {list(formal_dims)} != {list(residual)}")
            callee_scope[decl.name] = actual
        internal = [d for d in callee.streams if d.direction is Direction.INTERNAL]
        callee_scope.update(self.declare(callee, path, callee_env, False, internal))
        self.instantiate(callee, path, callee_env, callee_scope, stack + (callee.name,))

    def call_modifier(self, modifier: ModifierDef, call, path, env, scope, stream_args, indices) -> None:
        if modifier.name not in self.lowerings:
            self.lowerings[modifier.name] = lower_guards(modifier, self.catalog)
        bound = self._bind([p.name for p in modifier.params], call, stream_args, modifier.name)
        params = {}
        for param in modifier.params:
            ref = bound[param.name]
            resolved = self._resolve(ref, scope, env, modifier.name)
            if param.direction is Direction.OUT and resolved.delay:
                raise RdslError(f"'{path}' cannot write the delayed reference '{ref.name}'", call.pos)
            params[param.name] = (resolved, param.direction, _format_ref(ref))
        self.pending.append(_PendingTask(path, modifier, self.lowerings[modifier.name], params, indices))

    # ------------------------------------------------------------- buffers

    def record_writes(self) -> None:
        for task in self.pending:
            for slice_, direction, _ in task.params.values():
                if direction is not Direction.OUT:
                    continue
                root = self.roots[slice_.root]
                keys = self.writes.setdefault(root.name, {})
                for key in root.leaves(slice_.prefix):
                    if root.is_source:
                        raise DoubleDefine(buffer_id(root.name, key), "SOURCE", task.id)
                    for existing, writer in keys.items():
                        if comparable(existing, key):
                            raise DoubleDefine(buffer_id(root.name, key), writer, task.id)
                    keys[key] = task.id

    def readable(self, slice_: Slice) -> List[Key]:
        root = self.roots[slice_.root]
        if root.is_source:
            keys = root.leaves(())
        else:
            keys = list(self.writes.get(root.name, {}))
        return sorted(k for k in keys if comparable(k, slice_.prefix))


def _format_ref(ref: StreamRef) -> str:
    text = ref.name + "".join(f"[{format_expr(e)}]" for e in ref.indices)
    return f"{text}@-{ref.delay}" if ref.delay else text


def elaborate(
    unit: SourceUnit,
    top: str,
    symbols: SymbolTable,
    catalog: SdkCatalog,
    arrivals: Optional[Mapping[str, int]] = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> TaskGraph:
    """Flatten flow `top` into a TaskGraph for one period.

    The top flow's IN leaves become SOURCE buffers, buffers written into
    its OUT streams become SINKs. `arrivals` sets source arrival offsets by
    stream name or buffer id.
    """
    flow = unit.flow(top)
    if flow is None:
        raise UnknownCallee(top, "<top>")
    if flow.formals:
        raise UnboundIndex(flow.formals[0], top)
    arrivals = dict(arrivals or {})
    work = _Elaboration(unit, symbols, catalog, arrivals, max_depth)
    scope = work.declare(flow, "", {}, True, flow.streams)
    work.instantiate(flow, "", {}, scope, (flow.name,))
    work.record_writes()

    tasks: List[TaskInstance] = []
    produced: Dict[str, Tuple[str, str, Key, int]] = {}
    for pending in work.pending:
        inputs: List[InputRef] = []
        outputs: List[str] = []
        params = []
        for name, (slice_, direction, text) in pending.params.items():
            root = work.roots[slice_.root]
            if direction is Direction.OUT:
                ids = [buffer_id(root.name, k) for k in root.leaves(slice_.prefix)]
                outputs.extend(ids)
                for key, bid in zip(root.leaves(slice_.prefix), ids):
                    produced[bid] = (pending.id, root.name, key, pending.lowering.meta.elementsize)
            else:
                keys = work.readable(slice_)
                if not keys:
                    raise DanglingConsumer(text, pending.id)
                ids = [buffer_id(root.name, k) for k in keys]
                optional = name in pending.lowering.optional_params
                inputs.extend(InputRef(bid, slice_.delay, optional) for bid in ids)
            params.append((name, tuple(ids)))
        labels = sorted(
            {
                work.roots[s.root].label
                for s, d, _ in pending.params.values()
                if d is Direction.OUT and work.roots[s.root].label
            }
        )
        hard = {i.buffer for i in inputs if not i.optional}
        inputs = [i for i in inputs if not i.optional or i.buffer not in hard]
        tasks.append(
            TaskInstance(
                pending.id,
                pending.modifier.name,
                pending.lowering.meta,
                pending.lowering.runtime,
                tuple(sorted(set(inputs), key=lambda i: (i.buffer, i.delay, i.optional))),
                tuple(sorted(set(outputs))),
                tuple(params),
                pending.lowering.arms,
                pending.lowering.arm_costs,
                pending.index_args,
                tuple(labels),
            )
        )

    buffers: List[BufferInstance] = []
    labels: Dict[str, List[str]] = {}
    for root in work.roots.values():
        if not root.is_source:
            continue
        for key in root.leaves(()):
            bid = buffer_id(root.name, key)
            arrival = int(arrivals.get(bid, arrivals.get(root.name, 0)))
            buffers.append(BufferInstance(bid, root.name, key, external=External.SOURCE, arrival=arrival, labels=_labels(root)))
            if root.label:
                labels.setdefault(root.label, []).append(bid)
    for bid, (producer, stream, key, size) in produced.items():
        root = work.roots[stream]
        external = External.SINK if root.is_sink else External.NONE
        buffers.append(BufferInstance(bid, stream, key, producer, (), size, external=external, labels=_labels(root)))
        if root.label:
            labels.setdefault(root.label, []).append(bid)

    graph = build_graph(tasks, buffers, labels=labels)
    graph = _promote_unconsumed(graph)
    graph.check_acyclic()
    logger.info(f"[ELABORATE] '{top}': {len(graph.tasks)} tasks, {len(graph.buffers)} buffers")
    return graph


def _labels(root: RootStream) -> Tuple[str, ...]:
    return (root.label,) if root.label else ()


def _promote_unconsumed(graph: TaskGraph) -> TaskGraph:
    promoted: Dict[str, int] = {}
    buffers = []
    for buffer in graph.buffers:
        if buffer.external is External.NONE and not buffer.consumers:
            buffer = replace(buffer, external=External.SINK)
            promoted[buffer.stream] = promoted.get(buffer.stream, 0) + 1
        buffers.append(buffer)
    for stream in sorted(promoted):
        logger.warning(
            f"{Colors.WARNING}[ELABORATE] {promoted[stream]} unconsumed buffer(s) of '{stream}' become sinks{Colors.RESET}"
        )
    if not promoted:
        return graph
    return replace(graph, buffers=tuple(buffers))


# ---------------------------------------------------------------- siblings


def _rename_buffers(graph: TaskGraph, renames: Mapping[str, Tuple[str, ...]], input_renames: Mapping[Tuple[str, str], str]) -> List[TaskInstance]:
    """Rewrite task references: outputs/params via `renames`, inputs per consumer."""
    tasks = []
    for task in graph.tasks:
        inputs = tuple(
            replace(ref, buffer=input_renames.get((task.id, ref.buffer), ref.buffer)) for ref in task.inputs
        )
        outputs = []
        for bid in task.outputs:
            outputs.extend(renames.get(bid, (bid,)))
        params = []
        for name, ids in task.params:
            new_ids = []
            for bid in ids:
                if (task.id, bid) in input_renames:
                    new_ids.append(input_renames[(task.id, bid)])
                else:
                    new_ids.extend(renames.get(bid, (bid,)))
            params.append((name, tuple(dict.fromkeys(new_ids))))
        tasks.append(
            replace(
                task,
                inputs=tuple(sorted(set(inputs), key=lambda i: (i.buffer, i.delay, i.optional))),
                outputs=tuple(sorted(set(outputs))),
                params=tuple(params),
            )
        )
    return tasks


def expand_siblings(graph: TaskGraph, platform: PlatformDesc) -> TaskGraph:
    """Split buffers read from more than one candidate-processor group.

    One sibling per group, ordered by the group's sorted processor tuple;
    the producer writes every sibling.
    """
    renames: Dict[str, Tuple[str, ...]] = {}
    input_renames: Dict[Tuple[str, str], str] = {}
    new_buffers: List[BufferInstance] = []
    for buffer in graph.buffers:
        if buffer.is_source or len(buffer.consumers) < 2:
            new_buffers.append(buffer)
            continue
        groups: Dict[Tuple[str, ...], List[str]] = {}
        for consumer in buffer.consumers:
            task = graph.task(consumer)
            candidates = tuple(sorted(platform.candidate_processors(task.meta.available_patterns)))
            groups.setdefault(candidates, []).append(consumer)
        if len(groups) < 2:
            new_buffers.append(buffer)
            continue
        siblings = []
        for index, candidates in enumerate(sorted(groups), start=1):
            sid = f"{buffer.id}~{index}"
            siblings.append(sid)
            for consumer in groups[candidates]:
                input_renames[(consumer, buffer.id)] = sid
            new_buffers.append(replace(buffer, id=sid, sibling_group=buffer.id, consumers=tuple(groups[candidates])))
        renames[buffer.id] = tuple(siblings)
    if not renames:
        return graph
    tasks = _rename_buffers(graph, renames, input_renames)
    labels = {name: [s for bid in ids for s in renames.get(bid, (bid,))] for name, ids in graph.label_table}
    logger.debug(f"[ELABORATE] split {len(renames)} buffer(s) into siblings")
    return build_graph(tasks, new_buffers, graph.hyperperiod, labels)


def sibling_classes(graph: TaskGraph, assignment: Mapping[str, str]) -> Dict[str, Tuple[str, ...]]:
    """Representative sibling -> siblings sharing its assigned pattern."""
    classes: Dict[Tuple[str, object], List[str]] = {}
    for buffer in graph.buffers:
        if buffer.sibling_group is None:
            continue
        pattern = assignment.get(buffer.id, buffer.id)
        classes.setdefault((buffer.sibling_group, pattern), []).append(buffer.id)
    result = {}
    for members in classes.values():
        members = sorted(members)
        result[members[0]] = tuple(members)
    return result


def merge_redundant_siblings(graph: TaskGraph, assignment: Mapping[str, str]) -> TaskGraph:
    """Merge siblings of one group that were given the same pattern."""
    renames: Dict[str, Tuple[str, ...]] = {}
    merged: Dict[str, List[str]] = {}
    for representative, members in sibling_classes(graph, assignment).items():
        if len(members) < 2:
            continue
        for member in members:
            renames[member] = (representative,)
        merged[representative] = list(members)
    if not renames:
        return graph
    input_renames = {}
    for task in graph.tasks:
        for ref in task.inputs:
            if ref.buffer in renames:
                input_renames[(task.id, ref.buffer)] = renames[ref.buffer][0]
    tasks = _rename_buffers(graph, renames, input_renames)
    buffers = []
    for buffer in graph.buffers:
        if buffer.id in renames and buffer.id not in merged:
            continue
        buffers.append(buffer)
    labels = {
        name: list(dict.fromkeys(r for bid in ids for r in renames.get(bid, (bid,))))
        for name, ids in graph.label_table
    }
    return build_graph(tasks, buffers, graph.hyperperiod, labels)

