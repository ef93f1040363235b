"""Benchmark tree scenarios built inside the simulated memory.

Two shapes are modeled.  The *linear* scenario is a chain of k identical
24-byte nodes, each carrying an optional n-element double array; the
*dense* scenario is a branching tree where every non-leaf node points to a
contiguous block of q children and the last level uses a packed 12-byte
node.  Closed-form data sizes exist for both shapes but construction never
uses them: builders walk the structure and allocate object by object, and
the closed forms serve as independent cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .memory import Arena, Machine

NODE_SIZE = 24
LEAF_NODE_SIZE = 12  # dense last level: packed {count, array pointer}
ELEM_SIZE = 8

OFF_NA = 0
OFF_NLNEXT = 4
OFF_A = 8
OFF_LNEXT = 16
LEAF_OFF_A = 4

LAYOUTS = ("allinit_allused", "allinit_LLused", "LLinit_LLused")


@dataclass(frozen=True)
class LinearSpec:
    k: int
    n: int
    layout: str = "allinit_allused"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")

    @property
    def all_levels_allocated(self) -> bool:
        return self.layout.startswith("allinit")

    @property
    def all_levels_used(self) -> bool:
        return self.layout.endswith("allused")


@dataclass(frozen=True)
class DenseSpec:
    q: int
    n: int
    depth: int = 3

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")


@dataclass
class ArrayRef:
    level: int
    owner_addr: int
    addr: int
    count: int


@dataclass
class TreeHandle:
    """Everything a transfer scheme needs to know about one built tree."""

    spec: object
    root_addr: int
    node_addrs: list[int]
    node_levels: list[int]
    node_sizes: list[int]
    arrays: list[ArrayRef]
    # every non-null reference field exactly once: (holder, offset, target)
    reference_field_sites: list[tuple[int, int, int]]
    allocations: list[tuple[int, int]]  # (addr, size) in allocation order
    served_bytes: int
    seed: int

    def arrays_at_level(self, level: int) -> list[ArrayRef]:
        return [a for a in self.arrays if a.level == level]


# -- closed-form sizes (test oracles and report tables, never construction) --

def linear_data_size(k: int, n: int, layout: str = "allinit_allused") -> int:
    """Total bytes of a linear tree: 24k + 8nk, or 24k + 8n when only the
    last level allocates its array."""
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    if layout == "LLinit_LLused":
        return NODE_SIZE * k + ELEM_SIZE * n
    return NODE_SIZE * k + ELEM_SIZE * n * k


def dense_data_size(q: int, n: int, depth: int = 3) -> int:
    """Total bytes of a dense tree, evaluated bottom-up from the 12-byte
    leaf level: size(0) = 12 + 8n, size(d) = 24 + 8n + q*size(d-1)."""
    size = LEAF_NODE_SIZE + ELEM_SIZE * n
    for _ in range(depth):
        size = NODE_SIZE + ELEM_SIZE * n + q * size
    return size


# -- structural walks ---------------------------------------------------------

def iter_linear_allocations(spec: LinearSpec):
    """Allocation sizes in construction order: each node, then its array."""
    for level in range(spec.k):
        yield ("node", level, NODE_SIZE)
        if spec.n > 0 and (spec.all_levels_allocated or level == spec.k - 1):
            yield ("array", level, ELEM_SIZE * spec.n)


def iter_dense_allocations(spec: DenseSpec):
    """Allocation sizes in construction order (depth-first, arrays first)."""
    def walk(level):
        if spec.n > 0:
            yield ("array", level, ELEM_SIZE * spec.n)
        if level < spec.depth:
            child = NODE_SIZE if level + 1 < spec.depth else LEAF_NODE_SIZE
            yield ("block", level + 1, spec.q * child)
            for _ in range(spec.q):
                yield from walk(level + 1)

    yield ("node", 0, NODE_SIZE if spec.depth > 0 else LEAF_NODE_SIZE)
    yield from walk(0)


def tree_total_bytes(spec) -> int:
    """Dry-run traversal total; intentionally independent of the closed forms."""
    it = iter_linear_allocations(spec) if isinstance(spec, LinearSpec) \
        else iter_dense_allocations(spec)
    return sum(size for _, _, size in it)


def payload_values(seed: int, level: int, n: int) -> np.ndarray:
    """Deterministic per-element init pattern, exact in float64."""
    raw = (seed * 16777619 + level * 1000003 + np.arange(n, dtype=np.int64)) % (1 << 31)
    return raw.astype(np.float64)


# -- builders ----------------------------------------------------------------

def _alloc(machine: Machine, arena: Arena | None, size: int) -> int:
    return arena.allocate(size) if arena is not None else machine.alloc_host(size)


def build_linear_tree(machine: Machine, spec: LinearSpec,
                      arena: Arena | None = None, seed: int = 0) -> TreeHandle:
    host = machine.host
    nodes: list[int] = []
    arrays: list[ArrayRef] = []
    allocations: list[tuple[int, int]] = []
    array_at: dict[int, ArrayRef] = {}

    for kind, level, size in iter_linear_allocations(spec):
        addr = _alloc(machine, arena, size)
        allocations.append((addr, size))
        if kind == "node":
            nodes.append(addr)
        else:
            ref = ArrayRef(level, nodes[level], addr, spec.n)
            arrays.append(ref)
            array_at[level] = ref

    sites: list[tuple[int, int, int]] = []
    for level, node in enumerate(nodes):
        ref = array_at.get(level)
        host.write_u32(node + OFF_NA, ref.count if ref else 0)
        host.write_u32(node + OFF_NLNEXT, 1 if level < spec.k - 1 else 0)
        if ref is not None:
            host.write_word(node + OFF_A, ref.addr)
            sites.append((node, OFF_A, ref.addr))
            host.write_bytes(ref.addr, payload_values(seed, level, spec.n).tobytes())
        if level < spec.k - 1:
            host.write_word(node + OFF_LNEXT, nodes[level + 1])
            sites.append((node, OFF_LNEXT, nodes[level + 1]))

    handle = TreeHandle(
        spec=spec, root_addr=nodes[0], node_addrs=nodes,
        node_levels=list(range(spec.k)), node_sizes=[NODE_SIZE] * spec.k,
        arrays=arrays, reference_field_sites=sites, allocations=allocations,
        served_bytes=sum(size for _, size in allocations), seed=seed)
    if arena is not None:
        arena.pointer_sites = [h + off for h, off, _ in sites]
    return handle


def build_dense_tree(machine: Machine, spec: DenseSpec,
                     arena: Arena | None = None, seed: int = 0) -> TreeHandle:
    host = machine.host
    nodes: list[int] = []
    node_levels: list[int] = []
    node_sizes: list[int] = []
    arrays: list[ArrayRef] = []
    allocations: list[tuple[int, int]] = []
    sites: list[tuple[int, int, int]] = []

    def alloc(size):
        addr = _alloc(machine, arena, size)
        allocations.append((addr, size))
        return addr

    def fill(node: int, level: int) -> None:
        leaf = level == spec.depth
        nodes.append(node)
        node_levels.append(level)
        node_sizes.append(LEAF_NODE_SIZE if leaf else NODE_SIZE)
        off_a = LEAF_OFF_A if leaf else OFF_A
        if spec.n > 0:
            arr = alloc(ELEM_SIZE * spec.n)
            arrays.append(ArrayRef(level, node, arr, spec.n))
            host.write_u32(node + OFF_NA, spec.n)
            host.write_word(node + off_a, arr)
            sites.append((node, off_a, arr))
            host.write_bytes(arr, payload_values(seed, level, spec.n).tobytes())
        if not leaf:
            child_size = NODE_SIZE if level + 1 < spec.depth else LEAF_NODE_SIZE
            block = alloc(spec.q * child_size)
            host.write_u32(node + OFF_NLNEXT, spec.q)
            host.write_word(node + OFF_LNEXT, block)
            sites.append((node, OFF_LNEXT, block))
            for j in range(spec.q):
                fill(block + j * child_size, level + 1)

    root = alloc(NODE_SIZE if spec.depth > 0 else LEAF_NODE_SIZE)
    fill(root, 0)

    handle = TreeHandle(
        spec=spec, root_addr=root, node_addrs=nodes, node_levels=node_levels,
        node_sizes=node_sizes, arrays=arrays, reference_field_sites=sites,
        allocations=allocations,
        served_bytes=sum(size for _, size in allocations), seed=seed)
    if arena is not None:
        arena.pointer_sites = [h + off for h, off, _ in sites]
    return handle


def build_tree(machine: Machine, spec, arena: Arena | None = None,
               seed: int = 0) -> TreeHandle:
    if isinstance(spec, LinearSpec):
        return build_linear_tree(machine, spec, arena, seed)
    return build_dense_tree(machine, spec, arena, seed)


def marshal_tree(machine: Machine, spec, seed: int = 0) -> tuple[Arena, TreeHandle]:
    """Size the tree by traversal, then serve every allocation from one
    contiguous arena buffer so the whole tree can ship in a single op."""
    arena = machine.create_arena(tree_total_bytes(spec))
    handle = build_tree(machine, spec, arena=arena, seed=seed)
    return arena, handle


def targeted_arrays(handle: TreeHandle) -> list[ArrayRef]:
    """The arrays the scale kernel touches under the scenario's layout scheme."""
    spec = handle.spec
    if isinstance(spec, LinearSpec):
        if spec.all_levels_used:
            return list(handle.arrays)
        return handle.arrays_at_level(spec.k - 1)
    # dense: the array of the leaf reached by always taking the last child
    blocks = {holder: target for holder, off, target in handle.reference_field_sites
              if off == OFF_LNEXT}
    node = handle.root_addr
    for level in range(1, spec.depth + 1):
        child_size = NODE_SIZE if level < spec.depth else LEAF_NODE_SIZE
        node = blocks[node] + (spec.q - 1) * child_size
    return [a for a in handle.arrays if a.owner_addr == node]
