"""Simulated host and device memory spaces with full transfer logging.

Two disjoint 64-bit address ranges model the separate memory spaces of a
host/accelerator system.  A bump allocator hands out 8-byte-aligned blocks,
word-level accessors enforce that every access lands inside a live
allocation (a wild access models a dereference of a host pointer on the
device), and every data movement is appended to a transfer log so that a
benchmark harness can account bytes and operations exactly.

Transfer strategies implemented here:

* bulk range copies between spaces,
* arena marshalling: all allocations of one structure tree served from a
  single contiguous buffer, shipped in one transfer, followed by pointer
  attach fixups on the device image (and the exact reverse on the way back),
* naive per-object deep copy with per-field device fixups,
* a page-granular unified-memory mode where touches migrate pages between
  the two sides on demand.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass, field

HOST_BASE = 0x1000_0000
# Device range starts high enough that even the default 8 GiB capacities
# never overlap the host range.
DEVICE_BASE = 0xD0_0000_0000
DEFAULT_CAPACITY = 8 << 30
ALIGNMENT = 8
NULL_ADDR = 0

DEFAULT_PAGE_SIZE = 4096

H2D = "H2D"
D2H = "D2H"

# op kinds that move payload bytes; attach/detach are pointer fixups
DATA_OP_KINDS = ("bulk", "per_object", "page_migration")


class SimMemoryError(Exception):
    """Base class for simulated-memory faults."""


class OutOfSimMemory(SimMemoryError):
    pass


class WildAccess(SimMemoryError):
    """Access to an address outside any live allocation of a space."""


class AttachOutsideArena(SimMemoryError):
    """A pointer fixup targeted memory that is not part of the arena."""


@dataclass
class TransferEntry:
    direction: str
    op_kind: str
    bytes: int
    order: int


class TransferLog:
    """Append-only record of every simulated transfer, fixup and migration."""

    def __init__(self):
        self.entries: list[TransferEntry] = []

    def append(self, direction: str, op_kind: str, nbytes: int) -> None:
        if nbytes <= 0:
            raise ValueError("log entries must move at least one byte")
        self.entries.append(TransferEntry(direction, op_kind, nbytes, len(self.entries)))

    def mark(self) -> int:
        return len(self.entries)

    def since(self, mark: int) -> list[TransferEntry]:
        return self.entries[mark:]

    def bytes_moved(self, direction: str, since: int = 0) -> int:
        return sum(e.bytes for e in self.entries[since:]
                   if e.direction == direction and e.op_kind in DATA_OP_KINDS)

    def data_ops(self, since: int = 0) -> int:
        return sum(1 for e in self.entries[since:] if e.op_kind in DATA_OP_KINDS)

    def count(self, op_kind: str, since: int = 0) -> int:
        return sum(1 for e in self.entries[since:] if e.op_kind == op_kind)

    def dump(self) -> str:
        """Stable newline-delimited `direction,op_kind,bytes,order` records."""
        return "\n".join(f"{e.direction},{e.op_kind},{e.bytes},{e.order}"
                         for e in self.entries)


class MemorySpace:
    """One address range with a bump allocator and byte-addressed storage.

    Storage is kept per allocation, so large nominal capacities cost
    nothing until memory is actually handed out.
    """

    def __init__(self, kind: str, base: int = None, capacity: int = DEFAULT_CAPACITY):
        if kind not in ("host", "device"):
            raise ValueError(f"unknown space kind {kind!r}")
        self.kind = kind
        self.base = base if base is not None else (HOST_BASE if kind == "host" else DEVICE_BASE)
        self.capacity = capacity
        self.bump_offset = 0
        self._bases: list[int] = []
        self._blocks: dict[int, bytearray] = {}
        self._sizes: dict[int, int] = {}
        self._last_hit = -1  # locality cache into _bases

    @property
    def end(self) -> int:
        return self.base + self.capacity

    def allocate(self, size_bytes: int) -> int:
        if size_bytes <= 0:
            raise ValueError("allocation size must be positive")
        aligned = (size_bytes + ALIGNMENT - 1) & ~(ALIGNMENT - 1)
        if self.bump_offset + aligned > self.capacity:
            raise OutOfSimMemory(
                f"{self.kind} space exhausted: want {size_bytes} bytes, "
                f"{self.capacity - self.bump_offset} remain")
        addr = self.base + self.bump_offset
        self.bump_offset += aligned
        self._bases.append(addr)
        self._blocks[addr] = bytearray(size_bytes)
        self._sizes[addr] = size_bytes
        return addr

    def _locate(self, addr: int, nbytes: int) -> tuple[bytearray, int]:
        i = self._last_hit
        if 0 <= i < len(self._bases):
            base = self._bases[i]
            if base <= addr and addr + nbytes <= base + self._sizes[base]:
                return self._blocks[base], addr - base
        i = bisect_right(self._bases, addr) - 1
        if i >= 0:
            base = self._bases[i]
            if addr + nbytes <= base + self._sizes[base]:
                self._last_hit = i
                return self._blocks[base], addr - base
        raise WildAccess(
            f"{self.kind} access at 0x{addr:x} (+{nbytes}) hits no live allocation")

    def read_bytes(self, addr: int, nbytes: int) -> bytes:
        block, off = self._locate(addr, nbytes)
        return bytes(block[off:off + nbytes])

    def write_bytes(self, addr: int, data: bytes) -> None:
        block, off = self._locate(addr, len(data))
        block[off:off + len(data)] = data

    def read_word(self, addr: int) -> int:
        block, off = self._locate(addr, 8)
        return struct.unpack_from("<Q", block, off)[0]

    def write_word(self, addr: int, value: int) -> None:
        block, off = self._locate(addr, 8)
        struct.pack_into("<Q", block, off, value & 0xFFFF_FFFF_FFFF_FFFF)

    def read_u32(self, addr: int) -> int:
        block, off = self._locate(addr, 4)
        return struct.unpack_from("<I", block, off)[0]

    def write_u32(self, addr: int, value: int) -> None:
        block, off = self._locate(addr, 4)
        struct.pack_into("<I", block, off, value & 0xFFFF_FFFF)

    def read_f64(self, addr: int) -> float:
        block, off = self._locate(addr, 8)
        return struct.unpack_from("<d", block, off)[0]

    def write_f64(self, addr: int, value: float) -> None:
        block, off = self._locate(addr, 8)
        struct.pack_into("<d", block, off, value)

    def allocations(self) -> list[tuple[int, int]]:
        return [(b, self._sizes[b]) for b in self._bases]

    def snapshot(self, addr: int, nbytes: int) -> bytes:
        return self.read_bytes(addr, nbytes)


@dataclass
class AllocationRequest:
    host_addr: int
    size_bytes: int
    order: int


class Arena:
    """One contiguous host buffer that serves a whole tree's allocations.

    Sub-allocations are packed back to back (no padding) so the buffer size
    equals the exact sum of the requested bytes, and the whole tree ships in
    a single bulk transfer.
    """

    def __init__(self, space: MemorySpace, total_bytes: int):
        self.space = space
        self.buffer_host_addr = space.allocate(total_bytes)
        self.total_bytes = total_bytes
        self.served_offset = 0
        self.request_list: list[AllocationRequest] = []
        self.pointer_sites: list[int] = []  # absolute host addresses of pointer fields
        self.device_image_addr = NULL_ADDR

    def allocate(self, size_bytes: int) -> int:
        if size_bytes <= 0:
            raise ValueError("allocation size must be positive")
        if self.served_offset + size_bytes > self.total_bytes:
            raise OutOfSimMemory(
                f"arena exhausted: want {size_bytes} bytes, "
                f"{self.total_bytes - self.served_offset} remain")
        addr = self.buffer_host_addr + self.served_offset
        self.served_offset += size_bytes
        self.request_list.append(AllocationRequest(addr, size_bytes, len(self.request_list)))
        return addr

    def contains(self, addr: int) -> bool:
        return self.buffer_host_addr <= addr < self.buffer_host_addr + self.total_bytes


@dataclass
class PageState:
    resident: str  # "host" | "device"
    dirty: bool = False


class UvmState:
    """Page table for the unified-memory mode.

    Every page of a registered allocation is resident on exactly one side;
    a touch from the other side migrates it and logs one page_migration
    entry of page_size bytes.
    """

    def __init__(self, page_size: int = DEFAULT_PAGE_SIZE):
        self.page_size = page_size
        self.page_table: dict[int, PageState] = {}

    def register_range(self, addr: int, size: int) -> None:
        first = addr // self.page_size
        last = (addr + size - 1) // self.page_size
        for page in range(first, last + 1):
            self.page_table.setdefault(page, PageState("host"))

    def resident_pages(self, side: str) -> list[int]:
        return sorted(p for p, st in self.page_table.items() if st.resident == side)

    def dirty_pages(self) -> list[int]:
        return sorted(p for p, st in self.page_table.items() if st.dirty)


class Machine:
    """A host space, a device space, one transfer log, optional UVM mode."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY, page_size: int = DEFAULT_PAGE_SIZE):
        self.host = MemorySpace("host", HOST_BASE, capacity)
        self.device = MemorySpace("device", DEVICE_BASE, capacity)
        if not (self.host.end <= self.device.base or self.device.end <= self.host.base):
            raise ValueError("host and device address ranges must be disjoint")
        self.log = TransferLog()
        self.uvm: UvmState | None = None
        self._default_page_size = page_size

    def space(self, kind: str) -> MemorySpace:
        return self.host if kind == "host" else self.device

    def alloc_host(self, size_bytes: int) -> int:
        addr = self.host.allocate(size_bytes)
        if self.uvm is not None:
            self.uvm.register_range(addr, size_bytes)
        return addr

    def enable_uvm(self, page_size: int = None) -> UvmState:
        self.uvm = UvmState(page_size or self._default_page_size)
        return self.uvm

    def create_arena(self, total_bytes: int) -> Arena:
        return Arena(self.host, total_bytes)

    # -- transfers ---------------------------------------------------------

    def transfer_range(self, src: MemorySpace, src_addr: int,
                       dst: MemorySpace, dst_addr: int, nbytes: int,
                       op_kind: str = "bulk") -> None:
        """Copy nbytes between spaces (snapshot semantics) and log one entry."""
        if src.kind == dst.kind:
            raise ValueError("transfer_range requires distinct memory spaces")
        data = src.read_bytes(src_addr, nbytes)
        dst.write_bytes(dst_addr, data)
        direction = H2D if dst.kind == "device" else D2H
        self.log.append(direction, op_kind, nbytes)

    # -- marshalling (arena) -----------------------------------------------

    def marshal_transfer_and_attach(self, arena: Arena) -> int:
        """Ship the whole arena in one bulk op, then fix device pointers.

        Each recorded pointer field is rewritten in the device image from
        its host target address to the corresponding device-image address.
        """
        image = self.device.allocate(arena.total_bytes)
        self.transfer_range(self.host, arena.buffer_host_addr,
                            self.device, image, arena.total_bytes, "bulk")
        base = arena.buffer_host_addr
        for site in arena.pointer_sites:
            target = self.host.read_word(site)
            if not arena.contains(target):
                raise AttachOutsideArena(
                    f"pointer field at 0x{site:x} targets 0x{target:x} outside the arena")
            self.device.write_word(image + (site - base), image + (target - base))
            self.log.append(H2D, "attach", 8)
        arena.device_image_addr = image
        return image

    def demarshal(self, arena: Arena) -> None:
        """Bulk copy the device image back, then restore host pointers.

        Detach fixups run in the exact reverse order of the attaches.
        """
        image = arena.device_image_addr
        if image == NULL_ADDR:
            raise SimMemoryError("demarshal before marshal_transfer_and_attach")
        self.transfer_range(self.device, image,
                            self.host, arena.buffer_host_addr, arena.total_bytes, "bulk")
        base = arena.buffer_host_addr
        for site in reversed(arena.pointer_sites):
            value = self.host.read_word(site)  # device address from the image
            if not (image <= value < image + arena.total_bytes):
                raise AttachOutsideArena(
                    f"pointer field at 0x{site:x} holds 0x{value:x} outside the device image")
            self.host.write_word(site, base + (value - image))
            self.log.append(D2H, "detach", 8)
        arena.device_image_addr = NULL_ADDR

    # -- naive per-object deep copy ------------------------------------------

    def naive_deep_copy(self, tree) -> tuple[int, "AddressMap"]:
        """Copy every object of a host tree individually, then fix pointers.

        `tree` must provide `allocations` (ordered (addr, size) pairs),
        `reference_field_sites` ((holder, offset, target) triples) and
        `root_addr`.  Returns the device root address and the host-to-device
        translation map used for the fixups.
        """
        amap = AddressMap()
        for addr, size in tree.allocations:
            dev = self.device.allocate(size)
            self.transfer_range(self.host, addr, self.device, dev, size, "per_object")
            amap.add(addr, size, dev)
        for holder, offset, target in tree.reference_field_sites:
            self.device.write_word(amap.translate(holder) + offset, amap.translate(target))
            self.log.append(H2D, "attach", 8)
        return amap.translate(tree.root_addr), amap

    def naive_copy_back(self, tree, amap: "AddressMap") -> None:
        """Per-object copy back plus host-side pointer restoration."""
        for addr, size in tree.allocations:
            self.transfer_range(self.device, amap.translate(addr),
                                self.host, addr, size, "per_object")
        for holder, offset, target in reversed(tree.reference_field_sites):
            self.host.write_word(holder + offset, target)
            self.log.append(D2H, "detach", 8)

    # -- unified memory ----------------------------------------------------

    def uvm_touch(self, addr: int, access: str, actor: str) -> int:
        """Route one access through the page table; returns migrations (0/1)."""
        if self.uvm is None:
            raise SimMemoryError("uvm_touch outside UVM mode")
        state = self.uvm.page_table.get(addr // self.uvm.page_size)
        if state is None:
            raise WildAccess(f"unified access at 0x{addr:x} hits no registered page")
        migrated = 0
        if state.resident != actor:
            self.log.append(H2D if actor == "device" else D2H,
                            "page_migration", self.uvm.page_size)
            state.resident = actor
            state.dirty = False
            migrated = 1
        if access == "write":
            state.dirty = True
        return migrated


class AddressMap:
    """Interval map translating host addresses into a copied device image."""

    def __init__(self):
        self._entries: list[tuple[int, int, int]] = []  # (host_base, size, dev_base)
        self._bases: list[int] = []
        self._sorted = True

    def add(self, host_base: int, size: int, dev_base: int) -> None:
        self._entries.append((host_base, size, dev_base))
        self._sorted = False

    def translate(self, addr: int) -> int:
        if not self._sorted:
            self._entries.sort()
            self._bases = [e[0] for e in self._entries]
            self._sorted = True
        i = bisect_right(self._bases, addr) - 1
        if i >= 0:
            base, size, dev = self._entries[i]
            if addr < base + size:
                return dev + (addr - base)
        raise WildAccess(f"fixup target 0x{addr:x} was never copied to the device")
