"""Lexical frontend for `#pragma pointerchain` annotated C/C++ sources.

The parser is deliberately not a C parser: it masks comments and string
literals, scans for pointerchain pragmas line by line, tracks brace depth
for scope extents, and leaves every other line untouched.  A parsed unit
can always be serialized back to the original text byte for byte.

Recognized constructs::

    #pragma pointerchain declare(chain{type[:qualifier]}[, ...])
    #pragma pointerchain region begin [declare(...)]
    #pragma pointerchain region end

where `chain` is a member-access path such as ``sim->atoms->traits->pos``
or ``a0->Lnext[q-1].Lnext[q-1].A`` and `qualifier` is ``restrict`` or
``restrictconst``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

QUALIFIERS = ("none", "restrict", "restrictconst")

_PRAGMA_RE = re.compile(r"^(\s*)#\s*pragma\s+pointerchain\b\s*(.*?)\s*$")
_SEGMENT_RE = re.compile(
    r"\s*(->|\.)?\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\[([^\]]*)\])?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class DirectiveError(Exception):
    """Base class for pragma parsing failures; carries a line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line + 1}: {message}")
        self.line = line


class MalformedDeclare(DirectiveError):
    pass


class UnbalancedRegion(DirectiveError):
    pass


class NestedRegion(DirectiveError):
    pass


@dataclass(frozen=True)
class ChainSegment:
    """One accessor step; the first segment of a chain has no accessor."""

    accessor: str  # "", "->" or "."
    name: str
    index: str | None = None  # literal text inside [...] if present

    @property
    def kind(self) -> str:
        return "dot_indexed" if self.index is not None else "arrow"

    @property
    def text(self) -> str:
        idx = f"[{self.index}]" if self.index is not None else ""
        return f"{self.accessor}{self.name}{idx}"


@dataclass
class ChainDeclaration:
    segments: tuple[ChainSegment, ...]
    value_type: str
    qualifier: str = "none"
    declaration_site: int = 0  # 0-based line number
    inline: bool = False  # declared on a region-begin line

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a chain needs at least one segment")
        if self.qualifier not in QUALIFIERS:
            raise ValueError(f"unknown qualifier {self.qualifier!r}")

    @property
    def chain_text(self) -> str:
        return "".join(seg.text for seg in self.segments)

    @property
    def is_scalar(self) -> bool:
        return not self.value_type.rstrip().endswith("*")


@dataclass
class RegionSpan:
    begin_line: int
    end_line: int
    inline_declarations: list[ChainDeclaration] = field(default_factory=list)


@dataclass
class Diagnostic:
    severity: str
    message: str
    line: int

    def __str__(self):
        return f"{self.severity}: line {self.line + 1}: {self.message}"


@dataclass
class ParsedUnit:
    source_text: str
    lines: list[str]
    masked_lines: list[str]
    declarations: list[ChainDeclaration]
    regions: list[RegionSpan]
    # declaration index -> (first_line, last_line) visibility extent
    scopes: dict[int, tuple[int, int]]
    line_start_depth: list[int]

    def serialize(self) -> str:
        return self.source_text

    def scope_of(self, decl: ChainDeclaration) -> tuple[int, int]:
        if decl.inline:
            for region in self.regions:
                if decl in region.inline_declarations:
                    return (region.begin_line, region.end_line)
            raise KeyError("inline declaration not attached to any region")
        return self.scopes[self.declarations.index(decl)]

    def visible_declarations(self, region: RegionSpan) -> list[ChainDeclaration]:
        """Declarations usable inside `region`, in declaration order.

        A declaration is visible when it precedes the region and the region
        lies inside the declaration's enclosing-brace extent; the region's
        own inline declarations come last.
        """
        seen = []
        for i, decl in enumerate(self.declarations):
            lo, hi = self.scopes[i]
            if decl.declaration_site < region.begin_line and \
                    lo <= region.begin_line and region.end_line <= hi:
                seen.append(decl)
        seen.extend(region.inline_declarations)
        return seen


def mask_comments_and_strings(text: str) -> str:
    """Blank out comment and string-literal contents, preserving layout.

    Newlines survive so that line/column positions in the masked text line
    up exactly with the original.
    """
    out = list(text)
    n = len(text)
    i = 0
    while i < n:
        c = text[i]
        if c == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                out[i] = " "
                i += 1
        elif c == "/" and i + 1 < n and text[i + 1] == "*":
            out[i] = out[i + 1] = " "
            i += 2
            while i < n and not (text[i] == "*" and i + 1 < n and text[i + 1] == "/"):
                if text[i] != "\n":
                    out[i] = " "
                i += 1
            if i < n:
                out[i] = out[i + 1] = " "
                i += 2
        elif c == '"' or (c == "'" and not (i > 0 and text[i - 1].isalnum())):
            # the apostrophe guard skips C++14 digit separators like 1'000
            quote = c
            out[i] = " "
            i += 1
            while i < n and text[i] not in (quote, "\n"):
                out[i] = " "
                if text[i] == "\\" and i + 1 < n and text[i + 1] != "\n":
                    i += 1
                    out[i] = " "
                i += 1
            if i < n and text[i] == quote:
                out[i] = " "
                i += 1
        else:
            i += 1
    return "".join(out)


def parse_chain(text: str, line: int) -> tuple[ChainSegment, ...]:
    segments: list[ChainSegment] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _SEGMENT_RE.match(text, pos)
        if not m or m.end() == pos:
            raise MalformedDeclare(f"cannot parse chain {text!r}", line)
        accessor, name, index = m.group(1) or "", m.group(2), m.group(3)
        if not segments and accessor:
            raise MalformedDeclare(f"chain {text!r} starts with an accessor", line)
        if segments and not accessor:
            raise MalformedDeclare(f"missing accessor in chain {text!r}", line)
        segments.append(ChainSegment(accessor, name, index.strip() if index else index))
        pos = m.end()
    if not segments:
        raise MalformedDeclare("empty chain name", line)
    return tuple(segments)


def _split_top_level(text: str, sep: str = ",") -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch in "{([":
            depth += 1
        elif ch in "})]":
            depth -= 1
        elif ch == sep and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


def _split_qualifier(spec: str, line: int) -> tuple[str, str]:
    """Split `type[:qualifier]`, leaving C++ `::` scope operators alone."""
    for i in range(len(spec) - 1, -1, -1):
        if spec[i] != ":":
            continue
        if (i > 0 and spec[i - 1] == ":") or (i + 1 < len(spec) and spec[i + 1] == ":"):
            continue  # part of ::
        qualifier = spec[i + 1:].strip()
        if qualifier not in ("restrict", "restrictconst"):
            raise MalformedDeclare(f"unknown qualifier {qualifier!r}", line)
        return spec[:i].strip(), qualifier
    return spec.strip(), "none"


def parse_declare_args(args: str, line: int, inline: bool = False) -> list[ChainDeclaration]:
    declarations = []
    for raw in _split_top_level(args):
        var = raw.strip()
        if not var:
            raise MalformedDeclare("empty variable in declare", line)
        brace = var.find("{")
        if brace < 0 or not var.endswith("}"):
            raise MalformedDeclare(f"missing braces in {var!r}", line)
        name = var[:brace].strip()
        if not name:
            raise MalformedDeclare("empty chain name in declare", line)
        value_type, qualifier = _split_qualifier(var[brace + 1:-1], line)
        if not value_type:
            raise MalformedDeclare(f"empty type in {var!r}", line)
        declarations.append(ChainDeclaration(
            segments=parse_chain(name, line),
            value_type=value_type,
            qualifier=qualifier,
            declaration_site=line,
            inline=inline,
        ))
    return declarations


def _extract_parens(rest: str, line: int) -> str:
    open_idx = rest.find("(")
    if open_idx < 0:
        raise MalformedDeclare("declare without parentheses", line)
    depth = 0
    for i in range(open_idx, len(rest)):
        if rest[i] == "(":
            depth += 1
        elif rest[i] == ")":
            depth -= 1
            if depth == 0:
                if rest[i + 1:].strip():
                    raise MalformedDeclare(
                        f"unexpected text after declare: {rest[i + 1:].strip()!r}", line)
                return rest[open_idx + 1:i]
    raise MalformedDeclare("unbalanced parentheses in declare", line)


def _line_depths(masked_lines: list[str]) -> tuple[list[int], list[int]]:
    start, minimum = [], []
    depth = 0
    for text in masked_lines:
        start.append(depth)
        low = depth
        for ch in text:
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                low = min(low, depth)
        minimum.append(low)
    return start, minimum


def parse_unit(source_text: str) -> ParsedUnit:
    """Parse annotated source into declarations, regions and scope extents.

    Non-pragma lines pass through untouched; pragmas inside comments or
    string literals are ignored.
    """
    lines = source_text.split("\n")
    masked_lines = mask_comments_and_strings(source_text).split("\n")
    start_depth, min_depth = _line_depths(masked_lines)

    declarations: list[ChainDeclaration] = []
    regions: list[RegionSpan] = []
    open_region: int | None = None
    open_inline: list[ChainDeclaration] = []

    for lineno, masked in enumerate(masked_lines):
        m = _PRAGMA_RE.match(masked)
        if not m:
            continue
        rest = m.group(2)
        if rest.startswith("declare"):
            declarations.extend(parse_declare_args(
                _extract_parens(rest[len("declare"):], lineno), lineno))
        elif rest.startswith("region"):
            clause = rest[len("region"):].strip()
            if clause.startswith("begin"):
                if open_region is not None:
                    raise NestedRegion("region begin inside an open region", lineno)
                tail = clause[len("begin"):].strip()
                open_inline = []
                if tail:
                    if not tail.startswith("declare"):
                        raise MalformedDeclare(
                            f"unexpected region-begin clause {tail!r}", lineno)
                    open_inline = parse_declare_args(
                        _extract_parens(tail[len("declare"):], lineno), lineno,
                        inline=True)
                open_region = lineno
            elif clause == "end":
                if open_region is None:
                    raise UnbalancedRegion("region end without begin", lineno)
                regions.append(RegionSpan(open_region, lineno, open_inline))
                open_region = None
                open_inline = []
            else:
                raise MalformedDeclare(f"unknown region clause {clause!r}", lineno)
        else:
            raise MalformedDeclare(f"unknown pointerchain construct {rest!r}", lineno)

    if open_region is not None:
        raise UnbalancedRegion("region begin without end", open_region)

    scopes: dict[int, tuple[int, int]] = {}
    last = len(lines) - 1
    for i, decl in enumerate(declarations):
        depth = start_depth[decl.declaration_site]
        end = last
        if depth > 0:
            for j in range(decl.declaration_site + 1, len(lines)):
                if min_depth[j] < depth:
                    end = j
                    break
        scopes[i] = (decl.declaration_site, end)

    return ParsedUnit(
        source_text=source_text,
        lines=lines,
        masked_lines=masked_lines,
        declarations=declarations,
        regions=regions,
        scopes=scopes,
        line_start_depth=start_depth,
    )


def validate_unit(unit: ParsedUnit) -> list[Diagnostic]:
    """Non-fatal checks: vacuous regions and duplicate chain declarations."""
    diagnostics: list[Diagnostic] = []
    for region in unit.regions:
        if not unit.visible_declarations(region):
            diagnostics.append(Diagnostic(
                "warning", "region transforms nothing: no visible declarations",
                region.begin_line))
    by_chain: dict[str, list[int]] = {}
    for i, decl in enumerate(unit.declarations):
        by_chain.setdefault(decl.chain_text, []).append(i)
    for chain, indices in by_chain.items():
        for a in range(len(indices)):
            for b in range(a + 1, len(indices)):
                lo_a, hi_a = unit.scopes[indices[a]]
                lo_b, hi_b = unit.scopes[indices[b]]
                if lo_b <= hi_a and lo_a <= hi_b:  # overlapping extents
                    diagnostics.append(Diagnostic(
                        "warning", f"duplicate chain {chain!r} in the same scope",
                        unit.declarations[indices[b]].declaration_site))
    return diagnostics
