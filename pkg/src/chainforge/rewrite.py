"""Source rewriting for pointerchain directives.

Each declared chain is hoisted into a local binding holding its effective
address (or value, for scalar chains); occurrences inside regions are
replaced by the local, longest chain first; scalar chains are written back
after each region.  All pragma lines disappear from the output and every
other line is preserved byte for byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .frontend import (
    ChainDeclaration,
    DirectiveError,
    ParsedUnit,
    RegionSpan,
    _IDENT_RE,
    parse_unit,
)

DEFAULT_SUFFIX = ".pc.cpp"
SOURCE_EXTENSIONS = (".c", ".cpp", ".h", ".hpp")


class NameCollision(Exception):
    """No free local name could be generated for a chain binding."""


@dataclass
class Binding:
    declaration: ChainDeclaration
    local_name: str
    binding_line: str  # generated statement, without indentation
    insert_line: int  # pragma line it replaces

    @property
    def writeback_line(self) -> str | None:
        if not self.declaration.is_scalar:
            return None
        return f"{self.declaration.chain_text} = {self.local_name};"


@dataclass
class RegionPlan:
    region: RegionSpan
    # (chain_text, local_name, matcher), longest chain first
    replacements: list[tuple[str, str, re.Pattern]]
    writebacks: list[Binding]


@dataclass
class RewritePlan:
    bindings: list[Binding]
    region_plans: list[RegionPlan]
    replacement_count: int = 0  # filled in by transform_unit

    def bindings_at(self, line: int) -> list[Binding]:
        return [b for b in self.bindings if b.insert_line == line]


_QUALIFIER_DECORATION = {
    "none": "",
    "restrict": " __restrict",
    "restrictconst": " __restrict const",
}


def _binding_text(decl: ChainDeclaration, local: str) -> str:
    decoration = _QUALIFIER_DECORATION[decl.qualifier]
    return f"{decl.value_type}{decoration} {local} = {decl.chain_text};"


def _chain_matcher(decl: ChainDeclaration) -> re.Pattern:
    """Token-sequence matcher for one chain.

    Whitespace may appear between tokens.  The left guard rejects matches
    that continue a longer member access (preceded by an identifier
    character, `.`, `]` or the `>` of an arrow); the right guard rejects
    longer identifiers.
    """
    parts = []
    for seg in decl.segments:
        if seg.accessor:
            parts.append(r"\s*" + re.escape(seg.accessor) + r"\s*")
        parts.append(re.escape(seg.name))
        if seg.index is not None:
            parts.append(r"\s*\[\s*" + re.escape(seg.index) + r"\s*\]")
    return re.compile(r"(?<![\w.\]>])" + "".join(parts) + r"(?!\w)")


def plan_rewrites(unit: ParsedUnit) -> RewritePlan:
    """Assign collision-free local names and build per-region replacements."""
    taken = set(_IDENT_RE.findall("\n".join(unit.masked_lines)))
    bindings: list[Binding] = []
    by_decl: dict[int, Binding] = {}

    ordered: list[tuple[int, ChainDeclaration]] = [
        (d.declaration_site, d) for d in unit.declarations]
    for region in unit.regions:
        ordered.extend((region.begin_line, d) for d in region.inline_declarations)
    ordered.sort(key=lambda item: item[0])

    for ordinal, (line, decl) in enumerate(ordered, start=1):
        local = f"pc_{ordinal}"
        if local in taken:
            for i in range(1, 100):
                candidate = f"pc_{ordinal}_{i}"
                if candidate not in taken:
                    local = candidate
                    break
            else:
                raise NameCollision(f"no free name for chain {decl.chain_text!r}")
        taken.add(local)
        binding = Binding(decl, local, _binding_text(decl, local), line)
        bindings.append(binding)
        by_decl[id(decl)] = binding

    region_plans = []
    for region in unit.regions:
        visible = unit.visible_declarations(region)
        chosen: dict[str, Binding] = {}
        for decl in visible:  # later declarations shadow earlier ones
            chosen[decl.chain_text] = by_decl[id(decl)]
        replacements = [
            (chain, b.local_name, _chain_matcher(b.declaration))
            for chain, b in chosen.items()]
        replacements.sort(
            key=lambda r: (-(r[0].count("->") + r[0].count(".")), -len(r[0])))
        writebacks = [b for decl in visible
                      if (b := chosen.get(decl.chain_text)) is not None
                      and b.declaration is decl and decl.is_scalar]
        region_plans.append(RegionPlan(region, replacements, writebacks))

    return RewritePlan(bindings, region_plans)


def _replace_chains(line: str, masked: str,
                    replacements: list[tuple[str, str, re.Pattern]]) -> tuple[str, int]:
    """Replace chain occurrences in one line, longest chain first.

    Matching runs over the masked copy so chains inside comments or string
    literals survive untouched; spans map 1:1 onto the original line.
    """
    spans: list[tuple[int, int, str]] = []
    pos = 0
    while pos < len(masked):
        best = None
        for _, local, pattern in replacements:
            m = pattern.search(masked, pos)
            if m and (best is None or m.start() < best[0]):
                best = (m.start(), m.end(), local)
        if best is None:
            break
        spans.append(best)
        pos = best[1]
    if not spans:
        return line, 0
    out = []
    cursor = 0
    for start, end, local in spans:
        out.append(line[cursor:start])
        out.append(local)
        cursor = end
    out.append(line[cursor:])
    return "".join(out), len(spans)


def transform_unit(unit: ParsedUnit, plan: RewritePlan | None = None) -> str:
    """Emit the rewritten source; the result has no pointerchain pragmas."""
    if plan is None:
        plan = plan_rewrites(unit)

    region_of_line: dict[int, RegionPlan] = {}
    begin_lines = {}
    end_lines = {}
    for rp in plan.region_plans:
        begin_lines[rp.region.begin_line] = rp
        end_lines[rp.region.end_line] = rp
        for ln in range(rp.region.begin_line + 1, rp.region.end_line):
            region_of_line[ln] = rp

    out_lines: list[str] = []
    replaced = 0
    for lineno, line in enumerate(unit.lines):
        indent = line[:len(line) - len(line.lstrip())]
        if lineno in begin_lines:
            for binding in plan.bindings_at(lineno):
                out_lines.append(indent + binding.binding_line)
            continue
        if lineno in end_lines:
            for binding in end_lines[lineno].writebacks:
                out_lines.append(indent + binding.writeback_line)
            continue
        bindings_here = plan.bindings_at(lineno)
        if bindings_here:
            for binding in bindings_here:
                out_lines.append(indent + binding.binding_line)
            continue
        rp = region_of_line.get(lineno)
        if rp is not None:
            new_line, n = _replace_chains(line, unit.masked_lines[lineno],
                                          rp.replacements)
            replaced += n
            out_lines.append(new_line)
        else:
            out_lines.append(line)

    plan.replacement_count = replaced
    return "\n".join(out_lines)


@dataclass
class FileReport:
    path: Path
    out_path: Path | None
    declarations: int = 0
    regions: int = 0
    replacements: int = 0
    ok: bool = True
    error: str = ""


def _expand_paths(paths) -> list[Path]:
    expanded: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            expanded.extend(sorted(
                f for f in p.rglob("*") if f.suffix in SOURCE_EXTENSIONS))
        else:
            expanded.append(p)
    return expanded


def transform_files(paths, in_place: bool = False,
                    suffix: str = DEFAULT_SUFFIX) -> list[FileReport]:
    """Transform each file, writing siblings (or in place); never aborts the batch."""
    reports = []
    for path in _expand_paths(paths):
        out_path = path if in_place else path.with_suffix(suffix)
        report = FileReport(path, out_path)
        try:
            text = path.read_text()
            unit = parse_unit(text)
            plan = plan_rewrites(unit)
            result = transform_unit(unit, plan)
            out_path.write_text(result)
            report.declarations = len(unit.declarations) + sum(
                len(r.inline_declarations) for r in unit.regions)
            report.regions = len(unit.regions)
            report.replacements = plan.replacement_count
        except (OSError, UnicodeDecodeError, DirectiveError, NameCollision) as exc:
            report.ok = False
            report.error = str(exc)
            report.out_path = None
        reports.append(report)
    return reports
