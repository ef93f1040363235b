"""Emission of the linear-scenario C++ benchmark sources.

For every chain depth k one file is written per (transfer scheme, layout
scheme) pair.  The pointerchain variants carry `#pragma pointerchain`
directives and are valid input for the rewriter; the uvm and marshalling
variants are plain annotated C++.  The files are text artifacts: nothing
in this package compiles them, so their shape is pinned by golden tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .scenarios import LAYOUTS

EMITTED_SCHEMES = ("uvm", "marshalling", "pointerchain")
MANIFEST_NAME = "manifest.csv"


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    k: int
    scheme: str
    layout: str

    def line(self) -> str:
        return f"{self.path},{self.k},{self.scheme},{self.layout}"


def _chain(level: int) -> str:
    return "root" + "->Lnext" * level


def _struct_defs(k: int) -> list[str]:
    lines = []
    for level in range(k - 1, -1, -1):
        next_type = f"L{level + 1}" if level + 1 < k else "void"
        lines.append(f"typedef struct L{level}_s {{ int nA; int nLnext; "
                     f"double *A; {next_type} *Lnext; }} L{level};")
    return lines


def _alloc_lines(k: int, layout: str, marshalled: bool) -> list[str]:
    alloc = "pool_alloc" if marshalled else "calloc"
    lines = [f"    L0 *root = (L0 *){alloc}(1, sizeof(L0));"]
    for level in range(1, k):
        lines.append(f"    {_chain(level - 1)}->Lnext = "
                     f"(L{level} *){alloc}(1, sizeof(L{level}));")
    array_levels = _array_levels(k, layout)
    malloc = "pool_alloc(n," if marshalled else "malloc(n *"
    for level in array_levels:
        chain = _chain(level)
        lines.append(f"    {chain}->A = (double *){malloc} sizeof(double));")
        lines.append(f"    {chain}->nA = (int)n;")
    return lines


def _array_levels(k: int, layout: str) -> list[int]:
    return list(range(k)) if layout.startswith("allinit") else [k - 1]


def _used_levels(k: int, layout: str) -> list[int]:
    return list(range(k)) if layout.endswith("allused") else [k - 1]


def _init_lines(k: int, layout: str) -> list[str]:
    lines = []
    for level in _array_levels(k, layout):
        chain = _chain(level)
        lines.append(f"    for (long i = 0; i < n; ++i) "
                     f"{chain}->A[i] = (double)({level}L * 1000003 + i);")
    return lines


def _verify_lines(k: int, layout: str) -> list[str]:
    used = set(_used_levels(k, layout))
    lines = ["    long errors = 0;"]
    for level in _array_levels(k, layout):
        chain = _chain(level)
        factor = "scale * " if level in used else ""
        lines.append(f"    for (long i = 0; i < n; ++i)")
        lines.append(f"        if ({chain}->A[i] != {factor}"
                     f"(double)({level}L * 1000003 + i)) ++errors;")
    return lines


def _uvm_body(k: int, layout: str) -> list[str]:
    lines = ["    // unified memory: the runtime migrates pages on demand,",
             "    // so no explicit transfers are issued here"]
    for level in _used_levels(k, layout):
        chain = _chain(level)
        lines.append("    #pragma acc parallel loop")
        lines.append(f"    for (long i = 0; i < n; ++i) {chain}->A[i] *= scale;")
    return lines


def _marshalling_body(k: int, layout: str) -> list[str]:
    lines = ["    #pragma acc enter data copyin(pool_base[0:pool_total])"]
    for level in range(k - 1):
        lines.append(f"    acc_attach((void **)&{_chain(level)}->Lnext);")
    for level in _array_levels(k, layout):
        lines.append(f"    acc_attach((void **)&{_chain(level)}->A);")
    for level in _used_levels(k, layout):
        chain = _chain(level)
        lines.append("    #pragma acc parallel loop")
        lines.append(f"    for (long i = 0; i < n; ++i) {chain}->A[i] *= scale;")
    for level in reversed(_array_levels(k, layout)):
        lines.append(f"    acc_detach((void **)&{_chain(level)}->A);")
    for level in range(k - 2, -1, -1):
        lines.append(f"    acc_detach((void **)&{_chain(level)}->Lnext);")
    lines.append("    #pragma acc exit data copyout(pool_base[0:pool_total])")
    return lines


def _pointerchain_body(k: int, layout: str) -> list[str]:
    used = _used_levels(k, layout)
    chains = [f"{_chain(level)}->A" for level in used]
    declare = ", ".join(f"{c}{{double*}}" for c in chains)
    lines = [f"    #pragma pointerchain declare({declare})", ""]
    lines.append("    #pragma pointerchain region begin")
    for chain in chains:
        lines.append(f"    #pragma acc enter data copyin({chain}[0:n])")
    lines.append("    #pragma pointerchain region end")
    lines.append("")
    lines.append("    #pragma pointerchain region begin")
    for chain in chains:
        lines.append("    #pragma acc parallel loop")
        lines.append(f"    for (long i = 0; i < n; ++i) {chain}[i] *= scale;")
    lines.append("    #pragma pointerchain region end")
    lines.append("")
    lines.append("    #pragma pointerchain region begin")
    for chain in chains:
        lines.append(f"    #pragma acc exit data copyout({chain}[0:n])")
    lines.append("    #pragma pointerchain region end")
    return lines


_POOL_HELPERS = """\
static char *pool_base;
static size_t pool_total;
static size_t pool_offset;

static void *pool_alloc(size_t count, size_t size) {
    void *p = pool_base + pool_offset;
    pool_offset += count * size;
    return p;
}
"""


def render_linear_source(k: int, scheme: str, layout: str) -> str:
    if scheme not in EMITTED_SCHEMES:
        raise ValueError(f"unknown emitted scheme {scheme!r}")
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    if k < 1:
        raise ValueError("k must be >= 1")

    header = [
        f"// linear deep-copy benchmark: k={k}, scheme={scheme}, layout={layout}",
        "#include <cstdio>",
        "#include <cstdlib>",
    ]
    if scheme == "marshalling":
        header.append("#include <openacc.h>")
    header.append("")
    header.extend(_struct_defs(k))
    header.append("")
    header.append("static const double scale = 2.0;")
    header.append("")
    if scheme == "marshalling":
        header.append(_POOL_HELPERS)

    body = ["int main(int argc, char **argv) {",
            "    long n = argc > 1 ? atol(argv[1]) : 1000;"]
    if scheme == "marshalling":
        arrays = len(_array_levels(k, layout))
        body.append(f"    pool_total = {k}UL * sizeof(L0) + "
                    f"{arrays}UL * n * sizeof(double);")
        body.append("    pool_base = (char *)malloc(pool_total);")
    body.extend(_alloc_lines(k, layout, scheme == "marshalling"))
    body.extend(_init_lines(k, layout))
    body.append("")
    if scheme == "uvm":
        body.extend(_uvm_body(k, layout))
    elif scheme == "marshalling":
        body.extend(_marshalling_body(k, layout))
    else:
        body.extend(_pointerchain_body(k, layout))
    body.append("")
    body.extend(_verify_lines(k, layout))
    body.append(f'    printf("k={k} n=%ld errors=%ld\\n", n, errors);')
    body.append("    return errors ? 1 : 0;")
    body.append("}")

    return "\n".join(header + body) + "\n"


def emit_benchmark_sources(max_k: int, out_dir) -> list[ManifestEntry]:
    """Write one source per (k, scheme, layout) for k in [2, max_k].

    Returns the manifest entries and writes them as newline-delimited
    `path,k,scheme,layout` records next to the sources.
    """
    if max_k < 2:
        raise ValueError("max_k must be >= 2")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: list[ManifestEntry] = []
    for k in range(2, max_k + 1):
        for scheme in EMITTED_SCHEMES:
            for layout in LAYOUTS:
                path = out / f"linear_k{k}_{scheme}_{layout}.cpp"
                path.write_text(render_linear_source(k, scheme, layout))
                manifest.append(ManifestEntry(path, k, scheme, layout))
    (out / MANIFEST_NAME).write_text(
        "\n".join(entry.line() for entry in manifest) + "\n")
    return manifest
