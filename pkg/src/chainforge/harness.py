"""End-to-end execution of one benchmark case per transfer scheme.

A case allocates and initializes a scenario tree, makes it device-legal
under the chosen scheme (unified paging, arena marshalling, selective
pointerchain copies, or naive per-object deep copy), runs the scale kernel
once, transfers results back, verifies every element, and converts counted
events into simulated times through a configurable cost model.  Wall-clock
style repetition is modeled with an adaptive loop that stops once the
coefficient of variation of the samples is small enough.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .memory import DATA_OP_KINDS, Arena, AddressMap, Machine
from .scenarios import (
    LEAF_NODE_SIZE,
    LEAF_OFF_A,
    LinearSpec,
    NODE_SIZE,
    OFF_A,
    OFF_LNEXT,
    OFF_NA,
    TreeHandle,
    build_tree,
    marshal_tree,
    payload_values,
    targeted_arrays,
)

SCHEMES = ("uvm", "marshalling", "pointerchain", "naive")

# base cost of the single-loop kernel scaffold, calibrated so a kernel with
# zero chain steps costs exactly this many device instructions
KERNEL_BASE_INSTRUCTIONS = 60
PLAIN_STEP_INSTRUCTIONS = 2
INDEXED_STEP_INSTRUCTIONS = 6
FINAL_ARRAY_LOAD_INSTRUCTIONS = 2


class VerificationFailed(Exception):
    pass


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class CostModel:
    """Constants mapping counted events to simulated time.

    The defaults are an invented desk-scale profile (roughly V100-flavored:
    6 MiB of last-level cache); they are configuration, not measurement.
    """

    latency_us_per_op: float = 10.0
    bandwidth_gib_s: float = 12.0
    page_size: int = 4096
    elem_op_ns: float = 0.5
    deref_ns: float = 5.0
    l2_bytes: int = 6 << 20
    spill_penalty: float = 3.0

    def __post_init__(self):
        for name in ("latency_us_per_op", "bandwidth_gib_s", "page_size",
                     "elem_op_ns", "deref_ns", "l2_bytes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.spill_penalty < 1:
            raise ValueError("spill_penalty must be >= 1")

    @classmethod
    def from_file(cls, path) -> "CostModel":
        """Load overrides from flat `key=value` text; '#' starts a comment."""
        values = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"unknown cost-model key {key!r}")
            caster = cls.__dataclass_fields__[key].type
            values[key] = int(value) if caster == "int" else float(value)
        return cls(**values)


P100_COST_MODEL = CostModel(l2_bytes=4 << 20)


@dataclass(frozen=True)
class ChainShape:
    """Dereference shape of the kernel's access chain."""

    steps: tuple[str, ...] = ()  # "plain" | "indexed"
    count_final_array_load: bool = False


def chain_shape(spec, scheme: str) -> ChainShape:
    if scheme == "pointerchain":
        return ChainShape()
    if isinstance(spec, LinearSpec):
        return ChainShape(("plain",) * (spec.k - 1), False)
    return ChainShape(("indexed",) * spec.depth, True)


def estimate_instructions(shape: ChainShape) -> int:
    """Device instruction estimate for a single-chain scale kernel.

    Covers kernels that chase one chain (last-level layouts and the dense
    last-element path).  Multi-loop kernels that walk every level are out of
    this model's reach; see the reference fixture in the report module.
    """
    count = KERNEL_BASE_INSTRUCTIONS
    for step in shape.steps:
        count += INDEXED_STEP_INSTRUCTIONS if step == "indexed" \
            else PLAIN_STEP_INSTRUCTIONS
    if shape.count_final_array_load:
        count += FINAL_ARRAY_LOAD_INSTRUCTIONS
    return count


@dataclass
class RunMetrics:
    scenario: str
    scheme: str
    layout: str
    k_or_q: int
    n: int
    bytes_h2d: int = 0
    bytes_d2h: int = 0
    transfer_ops: int = 0
    attach_ops: int = 0
    page_faults: int = 0
    instr_estimate: int = 0
    sim_kernel_us: float = 0.0
    sim_wall_us: float = 0.0
    iterations: int = 1
    verified: bool = False

    def sort_key(self):
        return (self.scenario, self.scheme, self.layout, self.k_or_q, self.n)


@dataclass
class KernelStats:
    elements_touched: int = 0
    chain_derefs: int = 0


@dataclass
class RepeatResult:
    mean: float
    iterations: int
    converged: bool


def adaptive_repeat(run_closure, min_iters: int = 3, cv_threshold: float = 0.02,
                    max_iters: int = 100) -> RepeatResult:
    """Repeat until the coefficient of variation of the samples settles.

    Deterministic closures converge immediately after `min_iters` runs; a
    closure that keeps jittering is cut off at `max_iters` and flagged.
    """
    if min_iters < 3:
        raise ValueError("min_iters must be >= 3")
    samples: list[float] = []
    while True:
        samples.append(float(run_closure()))
        if len(samples) < min_iters:
            continue
        mean = statistics.fmean(samples)
        spread = statistics.pstdev(samples)
        cv = 0.0 if mean == 0 else spread / abs(mean)
        if cv < cv_threshold:
            return RepeatResult(mean, len(samples), True)
        if len(samples) >= max_iters:
            return RepeatResult(mean, len(samples), False)


def simulate_times(entries, elements_touched: int, chain_derefs: int,
                   cost_model: CostModel, working_set_bytes: int) -> tuple[float, float]:
    """Deterministic (kernel_us, wall_us) from counted events.

    Kernel time scales with touched elements (penalized once the working
    set spills the modeled cache) plus per-dereference latency; wall time
    adds per-op launch latency and bytes over the link for every
    data-moving transfer.  Attach/detach fixups carry no simulated time.
    """
    penalty = cost_model.spill_penalty if working_set_bytes > cost_model.l2_bytes else 1.0
    kernel_us = (elements_touched * cost_model.elem_op_ns * penalty
                 + chain_derefs * cost_model.deref_ns) / 1000.0
    wall_us = kernel_us
    per_byte_us = 1e6 / (cost_model.bandwidth_gib_s * (1 << 30))
    for entry in entries:
        if entry.op_kind in DATA_OP_KINDS:
            wall_us += cost_model.latency_us_per_op + entry.bytes * per_byte_us
    return kernel_us, wall_us


# -- scheme execution ---------------------------------------------------------

@dataclass
class DevicePrep:
    scheme: str
    device_root: int = 0
    buffers: list = field(default_factory=list)  # (device_addr, ArrayRef)
    arena: Arena | None = None
    amap: AddressMap | None = None


def transfer_to_device(machine: Machine, handle: TreeHandle, scheme: str,
                       arena: Arena | None = None) -> DevicePrep:
    if scheme == "marshalling":
        image = machine.marshal_transfer_and_attach(arena)
        root = image + (handle.root_addr - arena.buffer_host_addr)
        return DevicePrep(scheme, device_root=root, arena=arena)
    if scheme == "naive":
        root, amap = machine.naive_deep_copy(handle)
        return DevicePrep(scheme, device_root=root, amap=amap)
    if scheme == "pointerchain":
        buffers = []
        for ref in targeted_arrays(handle):
            if ref.count == 0:
                continue
            nbytes = ref.count * 8
            dev = machine.device.allocate(nbytes)
            machine.transfer_range(machine.host, ref.addr,
                                   machine.device, dev, nbytes, "bulk")
            buffers.append((dev, ref))
        return DevicePrep(scheme, buffers=buffers)
    if scheme == "uvm":
        return DevicePrep(scheme, device_root=handle.root_addr)
    raise SchemeError(f"unknown transfer scheme {scheme!r}")


def kernel_scale(machine: Machine, handle: TreeHandle, prep: DevicePrep,
                 scale: float) -> KernelStats:
    """Scale the targeted arrays where the scheme left them.

    For marshalled and naive trees the walk chases pointers inside the
    device image, so a broken attach surfaces as a wild access; UVM walks
    the unified space and routes every access through the page table.
    """
    stats = KernelStats()
    spec = handle.spec

    if prep.scheme == "pointerchain":
        for dev, ref in prep.buffers:
            _scale_block(machine.device, dev, ref.count, scale)
            stats.elements_touched += ref.count
        return stats

    uvm = prep.scheme == "uvm"
    space = machine.host if uvm else machine.device

    def read_ptr(addr):
        if uvm:
            machine.uvm_touch(addr, "read", "device")
        stats.chain_derefs += 1
        return space.read_word(addr)

    def read_count(addr):
        if uvm:
            machine.uvm_touch(addr, "read", "device")
        return space.read_u32(addr)

    def scale_array(aptr, count):
        if count == 0 or aptr == 0:
            return
        if uvm:
            for i in range(count):
                machine.uvm_touch(aptr + 8 * i, "read", "device")
                machine.uvm_touch(aptr + 8 * i, "write", "device")
        _scale_block(space, aptr, count, scale)
        stats.elements_touched += count

    if isinstance(spec, LinearSpec):
        node = prep.device_root
        for level in range(spec.k):
            if spec.all_levels_used or level == spec.k - 1:
                aptr = read_ptr(node + OFF_A)
                if aptr:
                    scale_array(aptr, read_count(node + OFF_NA))
            if level < spec.k - 1:
                node = read_ptr(node + OFF_LNEXT)
        return stats

    node = prep.device_root
    for level in range(1, spec.depth + 1):
        block = read_ptr(node + OFF_LNEXT)
        child = NODE_SIZE if level < spec.depth else LEAF_NODE_SIZE
        node = block + (spec.q - 1) * child
    aptr = read_ptr(node + LEAF_OFF_A)
    if aptr:
        scale_array(aptr, read_count(node + OFF_NA))
    return stats


def _scale_block(space, addr: int, count: int, scale: float) -> None:
    data = np.frombuffer(space.read_bytes(addr, count * 8), dtype="<f8")
    space.write_bytes(addr, (data * scale).tobytes())


def copy_back(machine: Machine, handle: TreeHandle, prep: DevicePrep) -> None:
    if prep.scheme == "marshalling":
        machine.demarshal(prep.arena)
    elif prep.scheme == "naive":
        machine.naive_copy_back(handle, prep.amap)
    elif prep.scheme == "pointerchain":
        for dev, ref in prep.buffers:
            machine.transfer_range(machine.device, dev,
                                   machine.host, ref.addr, ref.count * 8, "bulk")
    elif prep.scheme == "uvm":
        # host re-touches every page the kernel dirtied
        page_size = machine.uvm.page_size
        for page in machine.uvm.dirty_pages():
            machine.uvm_touch(page * page_size, "read", "host")


def verify_tree(machine: Machine, handle: TreeHandle, scale: float) -> None:
    """Check every element and pointer field on the host after copy-back."""
    host = machine.host
    targeted = {a.addr for a in targeted_arrays(handle)}
    for ref in handle.arrays:
        if ref.count == 0:
            continue
        got = host.read_bytes(ref.addr, ref.count * 8)
        expected = payload_values(handle.seed, ref.level, ref.count)
        if ref.addr in targeted:
            expected = expected * scale
        if got != expected.tobytes():
            raise VerificationFailed(
                f"array at 0x{ref.addr:x} (level {ref.level}) does not match")
    for holder, offset, target in handle.reference_field_sites:
        if host.read_word(holder + offset) != target:
            raise VerificationFailed(
                f"pointer field at 0x{holder + offset:x} not restored")


# -- one full case -------------------------------------------------------------

def _describe(spec) -> tuple[str, str, int, int]:
    if isinstance(spec, LinearSpec):
        return "linear", spec.layout, spec.k, spec.n
    return "dense", "dense", spec.q, spec.n


def execute_case(spec, scheme: str, cost_model: CostModel, seed: int = 0,
                 scale: float = 2.0) -> tuple[RunMetrics, Machine]:
    """Run one case once; returns the metrics and the machine (for its log)."""
    machine = Machine(page_size=cost_model.page_size)
    if scheme == "uvm":
        machine.enable_uvm(cost_model.page_size)

    arena = None
    if scheme == "marshalling":
        arena, handle = marshal_tree(machine, spec, seed=seed)
    else:
        handle = build_tree(machine, spec, seed=seed)

    mark = machine.log.mark()
    prep = transfer_to_device(machine, handle, scheme, arena)
    stats = kernel_scale(machine, handle, prep, scale)
    copy_back(machine, handle, prep)
    entries = machine.log.since(mark)

    kernel_us, wall_us = simulate_times(
        entries, stats.elements_touched, stats.chain_derefs,
        cost_model, handle.served_bytes)

    verify_tree(machine, handle, scale)  # outside the metered window

    scenario, layout, k_or_q, n = _describe(spec)
    metrics = RunMetrics(
        scenario=scenario, scheme=scheme, layout=layout, k_or_q=k_or_q, n=n,
        bytes_h2d=machine.log.bytes_moved("H2D", mark),
        bytes_d2h=machine.log.bytes_moved("D2H", mark),
        transfer_ops=machine.log.data_ops(mark),
        attach_ops=machine.log.count("attach", mark),
        page_faults=machine.log.count("page_migration", mark),
        instr_estimate=estimate_instructions(chain_shape(spec, scheme)),
        sim_kernel_us=kernel_us, sim_wall_us=wall_us,
        iterations=1, verified=True)
    return metrics, machine


def run_case(spec, scheme: str, cost_model: CostModel | None = None,
             seed: int = 0, scale: float = 2.0, min_iters: int = 3,
             cv_threshold: float = 0.02, max_iters: int = 50) -> RunMetrics:
    """Execute one (scenario, scheme) cell with adaptive repetition.

    The whole case is re-run until the wall-time samples converge; the
    simulation is deterministic, so this settles at `min_iters`.
    """
    if scheme not in SCHEMES:
        raise SchemeError(f"unknown transfer scheme {scheme!r}")
    cm = cost_model or CostModel()
    runs: list[RunMetrics] = []

    def one_run():
        metrics, _ = execute_case(spec, scheme, cm, seed, scale)
        runs.append(metrics)
        return metrics.sim_wall_us

    result = adaptive_repeat(one_run, min_iters, cv_threshold, max_iters)
    metrics = runs[-1]
    metrics.sim_wall_us = result.mean
    metrics.sim_kernel_us = statistics.fmean(r.sim_kernel_us for r in runs)
    metrics.iterations = result.iterations
    return metrics


def sweep(cases, cost_model: CostModel | None = None, seed: int = 0,
          min_iters: int = 3) -> list[RunMetrics]:
    """Run (spec, scheme) pairs and merge results in deterministic order."""
    rows = [run_case(spec, scheme, cost_model, seed=seed, min_iters=min_iters)
            for spec, scheme in cases]
    rows.sort(key=RunMetrics.sort_key)
    return rows
