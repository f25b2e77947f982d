"""Dependence graphs over the tolerant AST: data flow, control flow, merge.

Conventions (frozen; golden tests depend on them):
  * data edges run definition -> use (values flow along the edge);
  * each assignment creates one operation node plus one variable node per
    target; expression operators and calls get their own operation nodes;
  * uses with no visible definition attach to a placeholder node, one per
    name;
  * reaching definitions ignore aliasing; branches merge by union, loop
    bodies see only textually earlier definitions;
  * basic blocks are maximal branch-free statement runs between synthetic
    ENTRY (id 0) and EXIT (id 1) blocks; loop headers get their own block
    so back edges have a target.
"""

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from . import parser as parser_module
from .language import Language
from .parser import AstNode, CodeSnippet, make_snippet, parse_ast

VARIABLE = "variable"
OPERATION = "operation"
BASIC_BLOCK = "basic_block"
PLACEHOLDER = "placeholder"
DATA = "data"
CONTROL = "control"


class GraphMergeError(ValueError):
    """The two graphs were not derived from the same source."""


@dataclass(frozen=True)
class GraphNode:
    id: int
    kind: str
    label: str
    span: Optional[tuple[int, int]]


@dataclass(frozen=True)
class GraphEdge:
    src: int
    dst: int
    kind: str


@dataclass
class DepGraph:
    nodes: list[GraphNode]
    edges: list[GraphEdge]
    source_fingerprint: Optional[str] = None

    def to_payload(self) -> dict:
        return {
            "nodes": [
                {
                    "id": n.id,
                    "kind": n.kind,
                    "label": n.label,
                    "span": list(n.span) if n.span is not None else None,
                }
                for n in self.nodes
            ],
            "edges": [{"src": e.src, "dst": e.dst, "kind": e.kind} for e in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True, indent=1)

    @classmethod
    def from_payload(cls, payload: dict) -> "DepGraph":
        nodes = [
            GraphNode(n["id"], n["kind"], n["label"], tuple(n["span"]) if n["span"] else None)
            for n in payload["nodes"]
        ]
        edges = [GraphEdge(e["src"], e["dst"], e["kind"]) for e in payload["edges"]]
        return cls(nodes=nodes, edges=edges)

    @classmethod
    def from_json(cls, text: str) -> "DepGraph":
        return cls.from_payload(json.loads(text))


def validate_graph(graph: DepGraph) -> None:
    ids = [n.id for n in graph.nodes]
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate node ids")
    known = set(ids)
    for e in graph.edges:
        if e.src not in known or e.dst not in known:
            raise ValueError(f"dangling edge {e.src}->{e.dst}")


def _fingerprint(source: Optional[str]) -> Optional[str]:
    if source is None:
        return None
    return hashlib.blake2s(source.encode("utf-8")).hexdigest()[:16]


# --- data flow graph --------------------------------------------------------


class _DfgBuilder:
    def __init__(self):
        self.nodes: list[GraphNode] = []
        self.edges: list[GraphEdge] = []
        self.env: dict[str, tuple[int, ...]] = {}
        self.placeholders: dict[str, int] = {}

    def node(self, kind: str, label: str, span) -> int:
        nid = len(self.nodes)
        self.nodes.append(GraphNode(nid, kind, label, span))
        return nid

    def data_edge(self, src: int, dst: int) -> None:
        self.edges.append(GraphEdge(src, dst, DATA))

    def use(self, name: str, span) -> tuple[int, ...]:
        defs = self.env.get(name)
        if defs is None and "." in name:
            defs = self.env.get(name.split(".")[0])
        if defs is not None:
            return defs
        if name not in self.placeholders:
            self.placeholders[name] = self.node(PLACEHOLDER, name, span)
        pid = self.placeholders[name]
        self.env[name] = (pid,)
        return (pid,)

    def sources(self, expr: AstNode) -> list[int]:
        """Node ids feeding the consumer; creates operation nodes on the way."""
        kind = expr.kind
        if kind == "Var":
            return list(self.use(expr.label, expr.span))
        if kind in ("Lit", "Placeholder", "Token"):
            return []
        if kind in ("Assign", "AugAssign"):
            return self.do_assign(expr)
        if kind == "Call":
            label = expr.label + "()" if expr.label != "()" else "()"
            feeds = [s for child in expr.children for s in self.sources(child)]
            op = self.node(OPERATION, label, expr.span)
            for s in feeds:
                self.data_edge(s, op)
            return [op]
        if kind in ("BinOp", "Compare", "Unary", "Group", "Index", "Attr"):
            feeds = [s for child in expr.children for s in self.sources(child)]
            op = self.node(OPERATION, expr.label, expr.span)
            for s in feeds:
                self.data_edge(s, op)
            return [op]
        # statement-like node in expression position: treat as opaque
        return []

    def _target_vars(self, target: AstNode) -> list[tuple[str, AstNode]]:
        if target.kind == "Var":
            return [(target.label, target)]
        if target.kind == "Group":
            out = []
            for child in target.children:
                out.extend(self._target_vars(child))
            return out
        if target.kind in ("Index", "Attr"):
            base = target.children[0] if target.children else None
            if base is not None and base.kind == "Var":
                return [(base.label.split(".")[0], base)]
        return []

    def do_assign(self, stmt: AstNode) -> list[int]:
        target = stmt.children[0] if stmt.children else None
        value = stmt.children[1] if len(stmt.children) > 1 else None
        feeds: list[int] = []
        if value is not None:
            feeds.extend(self.sources(value))
        if target is not None and target.kind in ("Index", "Attr"):
            # subscript/attribute store reads the base and index too
            feeds.extend(self.sources(target))
        if stmt.kind == "AugAssign" and target is not None:
            for name, node in self._target_vars(target):
                feeds.extend(self.use(name, node.span))
        op = self.node(OPERATION, stmt.label, stmt.span)
        for s in feeds:
            self.data_edge(s, op)
        defined: list[int] = []
        for name, node in self._target_vars(target) if target is not None else []:
            vid = self.node(VARIABLE, name, node.span)
            self.data_edge(op, vid)
            self.env[name] = (vid,)
            defined.append(vid)
        return defined

    def _merge_envs(self, a: dict, b: dict) -> dict:
        merged = {}
        for name in {**a, **b}:
            ids = tuple(dict.fromkeys(a.get(name, ()) + b.get(name, ())))
            merged[name] = ids
        return merged

    def _header_op(self, label: str, exprs: list[AstNode]) -> int:
        feeds = [s for e in exprs for s in self.sources(e)]
        spans = [e.span for e in exprs if e.span is not None]
        span = (min(s[0] for s in spans), max(s[1] for s in spans)) if spans else None
        op = self.node(OPERATION, label, span)
        for s in feeds:
            self.data_edge(s, op)
        return op

    def do_stmt(self, stmt: AstNode) -> None:
        kind = stmt.kind
        if kind in ("Assign", "AugAssign"):
            self.do_assign(stmt)
            return
        if kind == "Return":
            feeds = [s for child in stmt.children for s in self.sources(child)]
            op = self.node(OPERATION, "return", stmt.span)
            for s in feeds:
                self.data_edge(s, op)
            return
        if kind == "If":
            blocks = [c for c in stmt.children if c.kind == "Block"]
            cond = [c for c in stmt.children if c.kind != "Block"]
            self._header_op("if", cond)
            pre = dict(self.env)
            self.env = dict(pre)
            for s in blocks[0].children if blocks else []:
                self.do_stmt(s)
            then_env = self.env
            self.env = dict(pre)
            if len(blocks) > 1:
                for s in blocks[1].children:
                    self.do_stmt(s)
            self.env = self._merge_envs(then_env, self.env)
            return
        if kind in ("While", "For"):
            blocks = [c for c in stmt.children if c.kind == "Block" and c.label == "body"]
            header = [c for c in stmt.children if not (c.kind == "Block" and c.label == "body")]
            label = "while" if kind == "While" else "for"
            if kind == "For":
                targets: list[AstNode] = []
                exprs: list[AstNode] = []
                for idx, child in enumerate(header):
                    if child.kind in ("Assign", "AugAssign"):
                        self.do_assign(child)
                    elif idx == 0 and child.kind in ("Var", "Group"):
                        targets.append(child)
                    else:
                        exprs.append(child)
                op = self._header_op(label, exprs)
                for t in targets:
                    for name, node in self._target_vars(t):
                        vid = self.node(VARIABLE, name, node.span)
                        self.data_edge(op, vid)
                        self.env[name] = (vid,)
            else:
                self._header_op(label, header)
            pre = dict(self.env)
            self.env = dict(pre)
            for s in blocks[0].children if blocks else []:
                self.do_stmt(s)
            self.env = self._merge_envs(pre, self.env)
            return
        if kind == "FuncDef":
            params = stmt.children[0] if stmt.children and stmt.children[0].label == "params" else None
            body = stmt.children[1:] if params is not None else stmt.children
            if params is not None:
                for p in params.children:
                    if p.kind == "Var":
                        vid = self.node(VARIABLE, p.label, p.span)
                        self.env[p.label] = (vid,)
            for s in body:
                self.do_stmt(s)
            return
        if kind == "Block":
            for s in stmt.children:
                self.do_stmt(s)
            return
        if kind in ("Placeholder", "Token", "Lit", "Var"):
            return
        # bare expression statement (call, comparison, ...)
        self.sources(stmt)


def build_dfg(ast: AstNode, source: Optional[str] = None) -> DepGraph:
    builder = _DfgBuilder()
    for stmt in ast.children:
        builder.do_stmt(stmt)
    return DepGraph(builder.nodes, builder.edges, _fingerprint(source))


# --- control flow graph -----------------------------------------------------


def _render(source: Optional[str], span, fallback: str) -> str:
    if source is None or span is None:
        return fallback
    return " ".join(source[span[0] : span[1]].split())


class _CfgBuilder:
    def __init__(self, source: Optional[str]):
        self.source = source
        self.nodes: list[GraphNode] = [
            GraphNode(0, BASIC_BLOCK, "ENTRY", None),
            GraphNode(1, BASIC_BLOCK, "EXIT", None),
        ]
        self.edges: list[GraphEdge] = []
        self.next_id = 2
        self.frontier: list[int] = [0]
        self.cur: Optional[int] = None
        self.cur_texts: list[str] = []
        self.cur_span: Optional[tuple[int, int]] = None

    def _open(self) -> int:
        bid = self.next_id
        self.next_id += 1
        for f in self.frontier:
            self.edges.append(GraphEdge(f, bid, CONTROL))
        self.frontier = [bid]
        self.cur = bid
        self.cur_texts = []
        self.cur_span = None
        return bid

    def _close(self) -> None:
        if self.cur is None:
            return
        label = "; ".join(self.cur_texts) if self.cur_texts else "<empty>"
        self.nodes.append(GraphNode(self.cur, BASIC_BLOCK, label, self.cur_span))
        self.cur = None

    def _add_text(self, text: str, span) -> None:
        if self.cur is None:
            self._open()
        self.cur_texts.append(text)
        if span is not None:
            lo = span[0] if self.cur_span is None else min(self.cur_span[0], span[0])
            hi = span[1] if self.cur_span is None else max(self.cur_span[1], span[1])
            self.cur_span = (lo, hi)

    def _header_span(self, stmt: AstNode) -> Optional[tuple[int, int]]:
        spans = [c.span for c in stmt.children if c.kind != "Block" and c.span is not None]
        if stmt.span is not None and spans:
            return (stmt.span[0], max(s[1] for s in spans))
        return stmt.span

    def walk(self, stmts: list[AstNode]) -> None:
        for stmt in stmts:
            kind = stmt.kind
            if kind == "If":
                self._do_if(stmt)
            elif kind in ("While", "For"):
                self._do_loop(stmt)
            elif kind == "Return":
                self._add_text(_render(self.source, stmt.span, "return"), stmt.span)
                self._close()
                for f in self.frontier:
                    self.edges.append(GraphEdge(f, 1, CONTROL))
                self.frontier = []
            elif kind == "FuncDef":
                params = stmt.children[0] if stmt.children and stmt.children[0].label == "params" else None
                body = stmt.children[1:] if params is not None else stmt.children
                self._add_text(stmt.label, None)
                self.walk(body)
            elif kind == "Block":
                self.walk(stmt.children)
            else:
                self._add_text(_render(self.source, stmt.span, stmt.label or kind), stmt.span)

    def _do_if(self, stmt: AstNode) -> None:
        blocks = [c for c in stmt.children if c.kind == "Block"]
        hdr_span = self._header_span(stmt)
        self._add_text("if " + _render(self.source, _cond_span(stmt), "<cond>"), hdr_span)
        cond_id = self.cur
        self._close()
        self.frontier = [cond_id]
        self.walk(blocks[0].children if blocks else [])
        self._close()
        then_frontier = self.frontier
        if len(blocks) > 1:
            self.frontier = [cond_id]
            self.walk(blocks[1].children)
            self._close()
            else_frontier = self.frontier
        else:
            else_frontier = [cond_id]
        merged = list(dict.fromkeys(then_frontier + else_frontier))
        self.frontier = merged

    def _do_loop(self, stmt: AstNode) -> None:
        keyword = "while" if stmt.kind == "While" else "for"
        self._close()
        header = self._open()
        self.cur_texts.append(keyword + " " + _render(self.source, _cond_span(stmt), "<header>"))
        self.cur_span = self._header_span(stmt)
        self._close()
        body_blocks = [c for c in stmt.children if c.kind == "Block" and c.label == "body"]
        self.frontier = [header]
        self.walk(body_blocks[0].children if body_blocks else [])
        self._close()
        for f in self.frontier:
            if f != header:
                self.edges.append(GraphEdge(f, header, CONTROL))
        self.frontier = [header]

    def finish(self) -> tuple[list[GraphNode], list[GraphEdge]]:
        self._close()
        for f in self.frontier:
            self.edges.append(GraphEdge(f, 1, CONTROL))
        self.nodes.sort(key=lambda n: n.id)
        return self.nodes, self.edges


def _cond_span(stmt: AstNode) -> Optional[tuple[int, int]]:
    spans = [
        c.span
        for c in stmt.children
        if not (c.kind == "Block") and c.span is not None
    ]
    if not spans:
        return None
    return (min(s[0] for s in spans), max(s[1] for s in spans))


def build_cfg(ast: AstNode, source: Optional[str] = None) -> DepGraph:
    builder = _CfgBuilder(source)
    builder.walk(ast.children)
    nodes, edges = builder.finish()
    return DepGraph(nodes, edges, _fingerprint(source))


# --- merge ------------------------------------------------------------------


def build_pdg(dfg: DepGraph, cfg: DepGraph) -> DepGraph:
    """Union the node sets (deduped by kind+label+span); keep every edge."""
    if (
        dfg.source_fingerprint is not None
        and cfg.source_fingerprint is not None
        and dfg.source_fingerprint != cfg.source_fingerprint
    ):
        raise GraphMergeError("graphs derived from different sources")
    nodes: list[GraphNode] = []
    index: dict[tuple, int] = {}
    remap: dict[tuple[int, int], int] = {}
    for gi, graph in enumerate((dfg, cfg)):
        for n in graph.nodes:
            key = (n.kind, n.label, n.span)
            if key in index:
                remap[(gi, n.id)] = index[key]
                continue
            nid = len(nodes)
            index[key] = nid
            nodes.append(GraphNode(nid, n.kind, n.label, n.span))
            remap[(gi, n.id)] = nid
    edges = [
        GraphEdge(remap[(gi, e.src)], remap[(gi, e.dst)], e.kind)
        for gi, graph in enumerate((dfg, cfg))
        for e in graph.edges
    ]
    return DepGraph(nodes, edges, dfg.source_fingerprint or cfg.source_fingerprint)


def graph_for_source(
    source: str,
    code_length: Optional[int] = parser_module.DEFAULT_CODE_LENGTH,
    language: Optional[Language] = None,
) -> tuple[CodeSnippet, DepGraph, DepGraph, DepGraph]:
    """Convenience: snippet -> (snippet, dfg, cfg, pdg). code_length=None disables truncation."""
    snippet = make_snippet(source, code_length=code_length, language=language)
    ast = parse_ast(snippet)
    dfg = build_dfg(ast, snippet.source)
    cfg = build_cfg(ast, snippet.source)
    return snippet, dfg, cfg, build_pdg(dfg, cfg)
