"""Value formatting, interpolation templates, and markdown-to-HTML.

The template dialect is a deliberately small mustache-like subset:
``{{name}}`` (markdown-escaped substitution), ``{{{name}}}`` (raw),
``{{#name}}...{{/name}}`` sections (conditional; iterated for lists),
``{{^name}}...{{/name}}`` inverted sections, dotted paths, and ``.`` for
the current value.  Unknown variables render as empty text.

The markdown renderer covers emphasis, links, images, inline code and
bullet lists, plus a fenced ``::: iframe`` block that embeds a trusted
URL as a figure with a linkable caption.  All raw HTML in the input is
escaped; the only tags in the output are the ones generated here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

from .errors import ParseError

# Characters that are markdown-significant; `{{name}}` escapes them.
_MD_ESCAPE = set("\\`*_[]()#")


def escape_markdown(text: str) -> str:
    return "".join("\\" + ch if ch in _MD_ESCAPE else ch for ch in text)


# ---------------------------------------------------------------------------
# Templates


@dataclass(frozen=True)
class _Node:
    kind: str  # text | var | raw | section | inverted
    value: str = ""
    children: tuple = ()


class Template:
    def __init__(self, source: str, nodes: tuple[_Node, ...]):
        self.source = source
        self._nodes = nodes

    def render(self, bindings: Any) -> str:
        return _render_nodes(self._nodes, [bindings])

    def __eq__(self, other):
        return isinstance(other, Template) and self.source == other.source

    def __repr__(self):
        return f"Template({self.source!r})"


_TAG_RE = re.compile(r"\{\{\{\s*(.+?)\s*\}\}\}|\{\{\s*([#^/]?)\s*(.+?)\s*\}\}", re.S)


def parse_template(source: str) -> Template:
    """Parse template text; raises ParseError on unbalanced blocks."""
    root: list[_Node] = []
    stack: list[tuple[str, str, list[_Node]]] = []  # (kind, name, children)
    nodes = root
    pos = 0
    for match in _TAG_RE.finditer(source):
        if match.start() > pos:
            nodes.append(_Node("text", source[pos : match.start()]))
        pos = match.end()
        if match.group(1) is not None:
            nodes.append(_Node("raw", match.group(1)))
            continue
        sigil, name = match.group(2), match.group(3)
        if sigil == "#":
            stack.append(("section", name, nodes))
            nodes = []
        elif sigil == "^":
            stack.append(("inverted", name, nodes))
            nodes = []
        elif sigil == "/":
            if not stack or stack[-1][1] != name:
                raise ParseError(f"unbalanced block {{{{/{name}}}}} in template")
            kind, open_name, parent = stack.pop()
            parent.append(_Node(kind, open_name, tuple(nodes)))
            nodes = parent
        else:
            nodes.append(_Node("var", name))
    if stack:
        raise ParseError(f"unclosed block {{{{#{stack[-1][1]}}}}} in template")
    if pos < len(source):
        nodes.append(_Node("text", source[pos:]))
    return Template(source, tuple(root))


def render_template(template: Template | str, bindings: Any) -> str:
    if isinstance(template, str):
        template = parse_template(template)
    return template.render(bindings)


def _lookup(stack: list, name: str):
    if name == ".":
        return stack[-1]
    parts = name.split(".")
    for frame in reversed(stack):
        value = frame
        found = True
        for part in parts:
            if isinstance(value, dict) and part in value:
                value = value[part]
            else:
                found = False
                break
        if found:
            return value
    return None


def _stringify(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(_stringify(v) for v in value)
    return str(value)


def _truthy(value: Any) -> bool:
    if isinstance(value, (list, tuple, dict, str)):
        return len(value) > 0
    return bool(value)


def _render_nodes(nodes: tuple[_Node, ...], stack: list) -> str:
    out: list[str] = []
    for node in nodes:
        if node.kind == "text":
            out.append(node.value)
        elif node.kind == "raw":
            out.append(_stringify(_lookup(stack, node.value)))
        elif node.kind == "var":
            out.append(escape_markdown(_stringify(_lookup(stack, node.value))))
        elif node.kind == "section":
            value = _lookup(stack, node.value)
            if isinstance(value, (list, tuple)):
                for item in value:
                    stack.append(item)
                    out.append(_render_nodes(node.children, stack))
                    stack.pop()
            elif _truthy(value):
                stack.append(value)
                out.append(_render_nodes(node.children, stack))
                stack.pop()
        elif node.kind == "inverted":
            if not _truthy(_lookup(stack, node.value)):
                out.append(_render_nodes(node.children, stack))
    return "".join(out)


# ---------------------------------------------------------------------------
# Value formatting


def format_value(value: Any, type_: str) -> str:
    """Default display text for a typed value; null is empty text."""
    if value is None:
        return ""
    if type_ == "int":
        return f"{int(value):,}"
    if type_ == "float":
        return repr(float(value))
    if type_ == "boolean":
        return "true" if value else "false"
    if type_ == "timestamp":
        # canonical storage form is RFC 3339 UTC; display drops seconds
        text = str(value)
        if len(text) >= 16 and text[10] == "T":
            return text[:10] + " " + text[11:16]
        return text
    return str(value)  # text, markdown, date


# ---------------------------------------------------------------------------
# Markdown


_IFRAME_OPEN_RE = re.compile(
    r"^:::\s*iframe\s+\[(?P<caption>[^\]]*)\]\((?P<url>[^)\s]+)\)\s*(?:\{(?P<attrs>[^}]*)\})?\s*$"
)
_IFRAME_CLOSE_RE = re.compile(r"^:::\s*$")
_LIST_ITEM_RE = re.compile(r"^[-*]\s+(.*)$")


def _escape_html(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("'", "&#39;")
    )


def _escape_attr(text: str) -> str:
    return _escape_html(text)


_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")
_SAFE_SCHEMES = ("http:", "https:", "mailto:")


def _safe_url(url: str) -> str | None:
    match = _SCHEME_RE.match(url)
    if match is None:
        return url  # relative URL or fragment
    lowered = url.lower()
    if any(lowered.startswith(s) for s in _SAFE_SCHEMES):
        return url
    return None


def markdown_to_html(doc: str) -> str:
    """Render the supported markdown subset to a safe HTML fragment."""
    blocks: list[str] = []
    lines = doc.replace("\x00", "").split("\n")
    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        open_match = _IFRAME_OPEN_RE.match(line)
        if open_match is not None:
            end = i + 1
            while end < len(lines) and not _IFRAME_CLOSE_RE.match(lines[end]):
                end += 1
            if end < len(lines):
                block = _render_iframe(open_match)
                if block is not None:
                    blocks.append(block)
                    i = end + 1
                    continue
            # malformed extension block: fall through as literal text
        item_match = _LIST_ITEM_RE.match(line)
        if item_match is not None:
            items = []
            while i < len(lines):
                m = _LIST_ITEM_RE.match(lines[i])
                if m is None:
                    break
                items.append(f"<li>{_render_inline(m.group(1))}</li>")
                i += 1
            blocks.append("<ul>" + "".join(items) + "</ul>")
            continue
        para: list[str] = []
        while i < len(lines) and lines[i].strip() and not _LIST_ITEM_RE.match(lines[i]):
            para.append(lines[i])
            i += 1
        blocks.append("<p>" + _render_inline(" ".join(para)) + "</p>")
    # a lone paragraph stays a bare inline fragment (cell-friendly)
    if len(blocks) == 1 and blocks[0].startswith("<p>"):
        return blocks[0][3:-4]
    return "\n".join(blocks)


def _render_iframe(match: re.Match) -> str | None:
    url = _safe_url(match.group("url"))
    if url is None:
        return None
    attrs: dict[str, str] = {}
    for part in (match.group("attrs") or "").split():
        if "=" in part:
            key, _, value = part.partition("=")
            if key in ("width", "height", "class"):
                attrs[key] = value
    figure_class = "embed"
    if "class" in attrs:
        figure_class += " " + attrs["class"]
    iframe_attrs = f' src="{_escape_attr(url)}"'
    if "width" in attrs:
        iframe_attrs += f' width="{_escape_attr(attrs["width"])}"'
    if "height" in attrs:
        iframe_attrs += f' height="{_escape_attr(attrs["height"])}"'
    caption = _escape_html(match.group("caption"))
    return (
        f'<figure class="{figure_class}">'
        f'<figcaption><a href="{_escape_attr(url)}" target="_blank">{caption}</a></figcaption>'
        f"<iframe{iframe_attrs}></iframe>"
        f"</figure>"
    )


_BACKSLASH_RE = re.compile(r"\\([\\`*_\[\]()#])")
_CODE_RE = re.compile(r"`([^`]+)`")
_IMAGE_RE = re.compile(r"!\[([^\]]*)\]\(([^)\s]+)\)")
_LINK_RE = re.compile(r"\[([^\]]*)\]\(([^)\s]+)\)")
# emphasis via asterisks only; intra-word underscores stay literal
_BOLD_RE = re.compile(r"\*\*([^*]+)\*\*")
_EM_RE = re.compile(r"\*([^*]+)\*")


def _render_inline(text: str) -> str:
    placeholders: list[str] = []

    def stash(html: str) -> str:
        placeholders.append(html)
        return f"\x00{len(placeholders) - 1}\x00"

    text = _escape_html(text)
    text = _BACKSLASH_RE.sub(lambda m: stash(m.group(1)), text)
    text = _CODE_RE.sub(lambda m: stash(f"<code>{m.group(1)}</code>"), text)

    def image(m: re.Match) -> str:
        url = _safe_url(m.group(2))
        if url is None:
            return m.group(0)
        return stash(f'<img src="{_escape_attr(url)}" alt="{m.group(1)}">')

    def link(m: re.Match) -> str:
        url = _safe_url(m.group(2))
        if url is None:
            return m.group(0)
        return stash(f'<a href="{_escape_attr(url)}">{m.group(1)}</a>')

    text = _IMAGE_RE.sub(image, text)
    text = _LINK_RE.sub(link, text)
    text = _BOLD_RE.sub(lambda m: f"<strong>{m.group(1)}</strong>", text)
    text = _EM_RE.sub(lambda m: f"<em>{m.group(1)}</em>", text)

    def restore(m: re.Match) -> str:
        return placeholders[int(m.group(1))]

    # stashed fragments can nest (escapes inside link text), so iterate
    while "\x00" in text:
        text = re.sub(r"\x00(\d+)\x00", restore, text)
    return text
