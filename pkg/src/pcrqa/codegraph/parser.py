"""Tolerant best-effort parser over a small statement/expression grammar.

Supported constructs: assignment, call, arithmetic/comparison expressions,
if/else, while, for, return, blocks (including function/class bodies).
Anything else degrades to a Placeholder leaf; the parser never raises on
snippet content.  Python-style suites (colon + indentation) and C-style
bodies (braces + semicolons) are both handled by one token-level parser.
"""

from dataclasses import dataclass, field
from typing import Optional

from .language import Language, detect_language

DEFAULT_CODE_LENGTH = 150


@dataclass(frozen=True)
class CodeSnippet:
    source: str
    language: Language
    truncated_to: int


def make_snippet(
    source: str,
    code_length: Optional[int] = DEFAULT_CODE_LENGTH,
    language: Optional[Language] = None,
) -> CodeSnippet:
    """Truncate to the configured budget, then detect the language."""
    used = source if code_length is None else source[:code_length]
    lang = language if language is not None else detect_language(used)
    return CodeSnippet(source=used, language=lang, truncated_to=len(used))


@dataclass
class AstNode:
    kind: str
    label: str
    children: list["AstNode"] = field(default_factory=list)
    span: Optional[tuple[int, int]] = None

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


# --- lexer ----------------------------------------------------------------

_MULTI_OPS = (
    "**=", "//=", "===", "!==", "<<=", ">>=",
    "==", "!=", "<=", ">=", "->", "=>", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "//", "**", "&&", "||", "::", "<<", ">>",
)


@dataclass(frozen=True)
class _Tok:
    type: str  # name | num | str | op | nl
    text: str
    start: int
    end: int


def _lex(source: str, python_style: bool) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            toks.append(_Tok("nl", "\n", i, i + 1))
            i += 1
            continue
        if c in " \t\r":
            i += 1
            continue
        if python_style and c == "#":
            j = source.find("\n", i)
            i = n if j == -1 else j
            continue
        if not python_style:
            if source.startswith("//", i) or c == "#":
                j = source.find("\n", i)
                i = n if j == -1 else j
                continue
            if source.startswith("/*", i):
                j = source.find("*/", i + 2)
                i = n if j == -1 else j + 2
                continue
        if c in "\"'":
            j = i + 1
            while j < n and source[j] not in (c, "\n"):
                j += 2 if source[j] == "\\" else 1
            j = min(j + 1, n) if j < n and source[j] == c else min(j, n)
            toks.append(_Tok("str", source[i:j], i, j))
            i = j
            continue
        if c.isdigit():
            j = i + 1
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            toks.append(_Tok("num", source[i:j], i, j))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            toks.append(_Tok("name", source[i:j], i, j))
            i = j
            continue
        for op in _MULTI_OPS:
            if source.startswith(op, i):
                toks.append(_Tok("op", op, i, i + len(op)))
                i += len(op)
                break
        else:
            toks.append(_Tok("op", c, i, i + 1))
            i += 1
    return toks


def _span(tokens: list[_Tok]) -> Optional[tuple[int, int]]:
    if not tokens:
        return None
    return (tokens[0].start, tokens[-1].end)


# --- expressions (Pratt) ----------------------------------------------------

_BIN_BP = {
    "or": 1, "||": 1,
    "and": 2, "&&": 2,
    "==": 4, "!=": 4, "===": 4, "!==": 4, "<": 4, ">": 4, "<=": 4, ">=": 4,
    "in": 4, "is": 4,
    "|": 5, "^": 5, "&": 5,
    "<<": 6, ">>": 6,
    "+": 7, "-": 7,
    "*": 8, "/": 8, "%": 8, "//": 8,
    "**": 10,
}
_COMPARE_OPS = {"==", "!=", "===", "!==", "<", ">", "<=", ">=", "in", "is"}
_AUG_OPS = {"+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "**=", "//=", "<<=", ">>="}
_OPEN = {"(": ")", "[": "]", "{": "}"}


class _ExprParser:
    def __init__(self, tokens: list[_Tok]):
        self.toks = tokens
        self.i = 0

    def _peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def _advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def parse(self, rbp: int = 0) -> AstNode:
        node = self._prefix()
        while True:
            tok = self._peek()
            if tok is None:
                return node
            key = tok.text if tok.type in ("op", "name") else None
            if key in _BIN_BP and _BIN_BP[key] > rbp:
                self._advance()
                next_rbp = _BIN_BP[key] - 1 if key == "**" else _BIN_BP[key]
                rhs = self.parse(next_rbp)
                kind = "Compare" if key in _COMPARE_OPS else "BinOp"
                start = (node.span or (tok.start, tok.end))[0]
                end = (rhs.span or (tok.start, tok.end))[1]
                node = AstNode(kind, key, [node, rhs], (start, end))
            else:
                return node

    def _prefix(self) -> AstNode:
        tok = self._peek()
        if tok is None:
            return AstNode("Placeholder", "<missing>", [], None)
        if tok.type == "name" and tok.text == "not":
            self._advance()
            child = self.parse(3)
            return AstNode("Unary", "not", [child], (tok.start, (child.span or (tok.start, tok.end))[1]))
        if tok.type == "op" and tok.text in ("-", "+", "!", "~"):
            self._advance()
            child = self.parse(9)
            return AstNode("Unary", tok.text, [child], (tok.start, (child.span or (tok.start, tok.end))[1]))
        if tok.type == "name":
            self._advance()
            return self._postfix(AstNode("Var", tok.text, [], (tok.start, tok.end)))
        if tok.type in ("num", "str"):
            self._advance()
            return self._postfix(AstNode("Lit", tok.text, [], (tok.start, tok.end)))
        if tok.type == "op" and tok.text in _OPEN:
            return self._postfix(self._group(tok.text))
        self._advance()
        return AstNode("Placeholder", tok.text, [], (tok.start, tok.end))

    def _group(self, opener: str) -> AstNode:
        open_tok = self._advance()
        closer = _OPEN[opener]
        items: list[AstNode] = []
        end = open_tok.end
        while True:
            tok = self._peek()
            if tok is None:
                items.append(AstNode("Placeholder", "<unclosed>", [], (end, end)))
                break
            if tok.type == "op" and tok.text == closer:
                end = tok.end
                self._advance()
                break
            if tok.type == "op" and tok.text == ",":
                self._advance()
                continue
            items.append(self.parse(0))
            end = items[-1].span[1] if items[-1].span else end
        if opener == "(" and len(items) == 1 and items[0].kind != "Placeholder":
            return items[0]
        return AstNode("Group", opener + closer, items, (open_tok.start, end))

    def _postfix(self, node: AstNode) -> AstNode:
        while True:
            tok = self._peek()
            if tok is None or tok.type != "op":
                return node
            if tok.text == "." :
                nxt = self.toks[self.i + 1] if self.i + 1 < len(self.toks) else None
                if nxt is not None and nxt.type == "name":
                    self._advance()
                    self._advance()
                    if node.kind == "Var":
                        node = AstNode("Var", node.label + "." + nxt.text, [], (node.span[0], nxt.end))
                    else:
                        node = AstNode("Attr", "." + nxt.text, [node], ((node.span or (tok.start, tok.end))[0], nxt.end))
                    continue
                return node
            if tok.text == "(":
                group = self._group("(")
                args = group.children if group.kind == "Group" else [group]
                label = node.label if node.kind == "Var" else "()"
                children = args if node.kind == "Var" else [node] + args
                start = (node.span or group.span or (tok.start, tok.end))[0]
                end = self.toks[self.i - 1].end if self.i > 0 else tok.end
                node = AstNode("Call", label, children, (start, end))
                continue
            if tok.text == "[":
                group = self._group("[")
                idx = group.children if group.kind == "Group" else [group]
                start = (node.span or (tok.start, tok.end))[0]
                end = self.toks[self.i - 1].end if self.i > 0 else tok.end
                node = AstNode("Index", "[]", [node] + idx, (start, end))
                continue
            return node


def _parse_expr(tokens: list[_Tok]) -> list[AstNode]:
    """Parse one expression; leftover tokens become a trailing Placeholder."""
    if not tokens:
        return []
    parser = _ExprParser(tokens)
    node = parser.parse(0)
    out = [node]
    if parser.i < len(tokens):
        rest = tokens[parser.i :]
        out.append(AstNode("Placeholder", _text_of(rest), [], _span(rest)))
    return out


def _text_of(tokens: list[_Tok]) -> str:
    return " ".join(t.text for t in tokens)


# --- simple statements ------------------------------------------------------

_CONTROL_WORDS = {"if", "elif", "else", "while", "for", "return", "def", "class"}


def _split_on(tokens: list[_Tok], sep: str) -> list[list[_Tok]]:
    parts, cur, depth = [], [], 0
    for tok in tokens:
        if tok.type == "op" and tok.text in _OPEN:
            depth += 1
        elif tok.type == "op" and tok.text in (")", "]", "}"):
            depth = max(0, depth - 1)
        if depth == 0 and tok.type == "op" and tok.text == sep:
            parts.append(cur)
            cur = []
        else:
            cur.append(tok)
    parts.append(cur)
    return parts


def _find_assign(tokens: list[_Tok]) -> Optional[int]:
    depth = 0
    for idx, tok in enumerate(tokens):
        if tok.type == "op" and tok.text in _OPEN:
            depth += 1
        elif tok.type == "op" and tok.text in (")", "]", "}"):
            depth = max(0, depth - 1)
        elif depth == 0 and tok.type == "op" and (tok.text == "=" or tok.text in _AUG_OPS):
            return idx
    return None


def _strip_type_names(tokens: list[_Tok]) -> list[_Tok]:
    """Drop leading type/modifier names so `final int x` targets x."""
    names = [t for t in tokens if t.type == "name"]
    if len(names) >= 2 and all(t.type == "name" or t.text in ("[", "]", "*") for t in tokens):
        return [names[-1]]
    return tokens


def _parse_simple(tokens: list[_Tok]) -> list[AstNode]:
    if not tokens:
        return []
    head = tokens[0]
    if head.type == "name" and head.text == "return":
        children = _parse_expr(tokens[1:])
        return [AstNode("Return", "return", children, _span(tokens))]
    if head.type == "name" and head.text in ("break", "continue", "pass", "import", "from", "switch", "case", "do", "try", "except", "catch", "finally", "raise", "throw"):
        return [AstNode("Placeholder", _text_of(tokens), [], _span(tokens))]
    eq = _find_assign(tokens)
    if eq is not None and eq > 0:
        op = tokens[eq].text
        target_toks = _strip_type_names(tokens[:eq])
        target = _parse_expr(target_toks)
        value = _parse_simple(tokens[eq + 1 :]) or [AstNode("Placeholder", "<missing>", [], (tokens[eq].end, tokens[eq].end))]
        kind = "Assign" if op == "=" else "AugAssign"
        return [AstNode(kind, op, target + value, _span(tokens))]
    if all(t.type == "name" for t in tokens) and len(tokens) >= 2:
        # bare declaration: `int x` defines x with no value
        target = tokens[-1]
        return [AstNode("Assign", "decl", [AstNode("Var", target.text, [], (target.start, target.end))], _span(tokens))]
    return _parse_expr(tokens)


# --- python-style suites ----------------------------------------------------


def _line_indent(source: str, pos: int) -> int:
    nl = source.rfind("\n", 0, pos)
    return pos - nl - 1


def _logical_lines(source: str, tokens: list[_Tok]) -> list[tuple[int, list[_Tok]]]:
    lines: list[tuple[int, list[_Tok]]] = []
    cur: list[_Tok] = []
    depth = 0
    for tok in tokens:
        if tok.type == "nl":
            if depth == 0 and cur:
                lines.append((_line_indent(source, cur[0].start), cur))
                cur = []
            continue
        if tok.type == "op" and tok.text in _OPEN:
            depth += 1
        elif tok.type == "op" and tok.text in (")", "]", "}"):
            depth = max(0, depth - 1)
        cur.append(tok)
    if cur:
        lines.append((_line_indent(source, cur[0].start), cur))
    return lines


class _PyParser:
    def __init__(self, source: str, lines: list[tuple[int, list[_Tok]]]):
        self.source = source
        self.lines = lines
        self.i = 0

    def parse_suite(self, parent_indent: int) -> list[AstNode]:
        nodes: list[AstNode] = []
        while self.i < len(self.lines) and self.lines[self.i][0] > parent_indent:
            nodes.extend(self.parse_line())
        return nodes

    def parse_module(self) -> list[AstNode]:
        nodes: list[AstNode] = []
        while self.i < len(self.lines):
            nodes.extend(self.parse_line())
        return nodes

    def parse_line(self) -> list[AstNode]:
        indent, tokens = self.lines[self.i]
        self.i += 1
        head = tokens[0]
        if head.type == "name" and head.text in ("if", "while", "for"):
            return [self._control(indent, tokens)]
        if head.type == "name" and head.text in ("def", "class"):
            return [self._definition(indent, tokens)]
        if head.type == "name" and head.text in ("elif", "else"):
            # orphan branch: keep its suite, mark the header unparseable
            header = AstNode("Placeholder", _text_of(tokens), [], _span(tokens))
            body = self.parse_suite(indent)
            return [header] + body
        return self._simple_line(tokens)

    def _simple_line(self, tokens: list[_Tok]) -> list[AstNode]:
        nodes = []
        for part in _split_on(tokens, ";"):
            nodes.extend(_parse_simple(part))
        return nodes

    def _header_split(self, tokens: list[_Tok]) -> tuple[list[_Tok], list[_Tok]]:
        """Split a control line at the suite colon: (header, inline suite)."""
        depth = 0
        for idx, tok in enumerate(tokens):
            if tok.type == "op" and tok.text in _OPEN:
                depth += 1
            elif tok.type == "op" and tok.text in (")", "]", "}"):
                depth = max(0, depth - 1)
            elif depth == 0 and tok.type == "op" and tok.text == ":":
                return tokens[:idx], tokens[idx + 1 :]
        return tokens, []

    def _suite(self, indent: int, inline: list[_Tok]) -> list[AstNode]:
        if inline:
            return self._simple_line(inline)
        return self.parse_suite(indent)

    def _control(self, indent: int, tokens: list[_Tok]) -> AstNode:
        keyword = tokens[0].text
        header, inline = self._header_split(tokens[1:])
        start = tokens[0].start
        if keyword == "for":
            in_idx = next(
                (k for k, t in enumerate(header) if t.type == "name" and t.text == "in"),
                None,
            )
            if in_idx is None:
                target = [AstNode("Placeholder", _text_of(header) or "<missing>", [], _span(header) or (start, start))]
                iter_expr: list[AstNode] = []
            else:
                target = _parse_expr(header[:in_idx])
                iter_expr = _parse_expr(header[in_idx + 1 :])
            body = self._suite(indent, inline)
            children = target + iter_expr + [AstNode("Block", "body", body, _span_of(body))]
            return AstNode("For", "for", children, (start, _end_of(children, start)))
        cond = _parse_expr(header) or [AstNode("Placeholder", "<missing>", [], (start, start))]
        body = self._suite(indent, inline)
        block = AstNode("Block", "body", body, _span_of(body))
        if keyword == "while":
            return AstNode("While", "while", cond + [block], (start, _end_of([block] + cond, start)))
        orelse = self._else_chain(indent)
        children = cond + [block] + ([orelse] if orelse else [])
        return AstNode("If", "if", children, (start, _end_of(children, start)))

    def _else_chain(self, indent: int) -> Optional[AstNode]:
        if self.i >= len(self.lines):
            return None
        next_indent, tokens = self.lines[self.i]
        if next_indent != indent or tokens[0].type != "name":
            return None
        if tokens[0].text == "elif":
            self.i += 1
            nested = self._control(indent, [_Tok("name", "if", tokens[0].start, tokens[0].end)] + tokens[1:])
            return AstNode("Block", "else", [nested], nested.span)
        if tokens[0].text == "else":
            self.i += 1
            _, inline = self._header_split(tokens[1:])
            body = self._suite(indent, inline)
            return AstNode("Block", "else", body, _span_of(body))
        return None

    def _definition(self, indent: int, tokens: list[_Tok]) -> AstNode:
        keyword = tokens[0].text
        header, inline = self._header_split(tokens[1:])
        name = header[0].text if header and header[0].type == "name" else "<anon>"
        params: list[AstNode] = []
        if keyword == "def":
            opens = [k for k, t in enumerate(header) if t.type == "op" and t.text == "("]
            closes = [k for k, t in enumerate(header) if t.type == "op" and t.text == ")"]
            inner = header[opens[0] + 1 : closes[-1]] if opens and closes else []
            for part in _split_on(inner, ","):
                names = [t for t in part if t.type == "name"]
                if names:
                    params.append(AstNode("Var", names[0].text, [], (names[0].start, names[0].end)))
        body = self._suite(indent, inline)
        kind = "FuncDef" if keyword == "def" else "Block"
        children = [AstNode("Group", "params", params, _span_of(params))] + body if keyword == "def" else body
        return AstNode(kind, f"{keyword} {name}", children, (tokens[0].start, _end_of(children, tokens[0].end)))


# --- C-style statements -----------------------------------------------------


class _CParser:
    def __init__(self, tokens: list[_Tok]):
        self.toks = tokens
        self.i = 0

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    def _peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def parse_stmts(self, until_brace: bool = False) -> list[AstNode]:
        nodes: list[AstNode] = []
        while not self.at_end():
            tok = self._peek()
            if until_brace and tok.type == "op" and tok.text == "}":
                self.i += 1
                return nodes
            before = self.i
            nodes.extend(self.parse_stmt())
            if self.i == before:
                nodes.append(AstNode("Placeholder", tok.text, [], (tok.start, tok.end)))
                self.i += 1
        return nodes

    def _match_paren(self) -> Optional[list[_Tok]]:
        """Consume a parenthesized group right at the cursor; None if absent."""
        tok = self._peek()
        if tok is None or tok.text != "(":
            return None
        depth = 0
        start = self.i
        while self.i < len(self.toks):
            t = self.toks[self.i]
            if t.type == "op" and t.text == "(":
                depth += 1
            elif t.type == "op" and t.text == ")":
                depth -= 1
                if depth == 0:
                    inner = self.toks[start + 1 : self.i]
                    self.i += 1
                    return inner
            self.i += 1
        inner = self.toks[start + 1 :]
        self.i = len(self.toks)
        return inner

    def _body(self) -> list[AstNode]:
        tok = self._peek()
        if tok is not None and tok.type == "op" and tok.text == "{":
            self.i += 1
            return self.parse_stmts(until_brace=True)
        if tok is None:
            return []
        return self.parse_stmt()

    def parse_stmt(self) -> list[AstNode]:
        tok = self._peek()
        if tok is None:
            return []
        if tok.type == "op" and tok.text == "{":
            self.i += 1
            body = self.parse_stmts(until_brace=True)
            return [AstNode("Block", "block", body, _span_of(body))]
        if tok.type == "op" and tok.text == ";":
            self.i += 1
            return []
        if tok.type == "name" and tok.text == "if":
            return [self._if(tok)]
        if tok.type == "name" and tok.text in ("while", "for"):
            return [self._loop(tok)]
        if tok.type == "name" and tok.text == "return":
            self.i += 1
            expr_toks = self._until_semi()
            children = _parse_expr(expr_toks)
            end = expr_toks[-1].end if expr_toks else tok.end
            return [AstNode("Return", "return", children, (tok.start, end))]
        if tok.type == "name" and tok.text in ("struct", "class"):
            return [self._record(tok)]
        func = self._try_funcdef()
        if func is not None:
            return [func]
        stmt_toks = self._until_semi()
        return _parse_simple(stmt_toks)

    def _until_semi(self) -> list[_Tok]:
        out: list[_Tok] = []
        depth = 0
        while not self.at_end():
            t = self.toks[self.i]
            if t.type == "op" and t.text in _OPEN:
                depth += 1
            elif t.type == "op" and t.text in (")", "]"):
                depth = max(0, depth - 1)
            elif t.type == "op" and t.text == "}" and depth == 0:
                break
            elif t.type == "op" and t.text == "{" :
                depth += 1
            if t.type == "op" and t.text == ";" and depth == 0:
                self.i += 1
                break
            out.append(t)
            self.i += 1
        return out

    def _if(self, head: _Tok) -> AstNode:
        self.i += 1
        cond_toks = self._match_paren()
        if cond_toks is None:
            return AstNode("Placeholder", "if", [], (head.start, head.end))
        cond = _parse_expr(cond_toks) or [AstNode("Placeholder", "<missing>", [], (head.start, head.end))]
        body = self._body()
        block = AstNode("Block", "body", body, _span_of(body))
        orelse = None
        nxt = self._peek()
        if nxt is not None and nxt.type == "name" and nxt.text == "else":
            self.i += 1
            after = self._peek()
            if after is not None and after.type == "name" and after.text == "if":
                nested = self._if(after)
                orelse = AstNode("Block", "else", [nested], nested.span)
            else:
                else_body = self._body()
                orelse = AstNode("Block", "else", else_body, _span_of(else_body))
        children = cond + [block] + ([orelse] if orelse else [])
        return AstNode("If", "if", children, (head.start, _end_of(children, head.end)))

    def _loop(self, head: _Tok) -> AstNode:
        keyword = head.text
        self.i += 1
        inner = self._match_paren()
        if inner is None:
            body = self._body()
            children = [AstNode("Placeholder", "<missing>", [], (head.end, head.end)),
                        AstNode("Block", "body", body, _span_of(body))]
            return AstNode("While" if keyword == "while" else "For", keyword, children, (head.start, _end_of(children, head.end)))
        if keyword == "while":
            cond = _parse_expr(inner) or [AstNode("Placeholder", "<missing>", [], (head.end, head.end))]
            body = self._body()
            block = AstNode("Block", "body", body, _span_of(body))
            return AstNode("While", "while", cond + [block], (head.start, _end_of([block], head.end)))
        parts = _split_on(inner, ";")
        if len(parts) == 1:
            # for-each: `for (int x : xs)`
            halves = _split_on(inner, ":")
            target = _parse_simple(_strip_type_names(halves[0])) if halves[0] else []
            iter_expr = _parse_expr(halves[1]) if len(halves) > 1 else []
            pieces = (target or [AstNode("Placeholder", "<missing>", [], (head.end, head.end))]) + iter_expr
        else:
            pieces = []
            for part in parts[:3]:
                if part:
                    pieces.extend(_parse_simple(part))
                else:
                    pieces.append(AstNode("Placeholder", "<missing>", [], (head.end, head.end)))
        body = self._body()
        children = pieces + [AstNode("Block", "body", body, _span_of(body))]
        return AstNode("For", "for", children, (head.start, _end_of(children, head.end)))

    def _record(self, head: _Tok) -> AstNode:
        self.i += 1
        name = "<anon>"
        nxt = self._peek()
        if nxt is not None and nxt.type == "name":
            name = nxt.text
            self.i += 1
        nxt = self._peek()
        if nxt is not None and nxt.type == "op" and nxt.text == "{":
            self.i += 1
            body = self.parse_stmts(until_brace=True)
            return AstNode("Block", f"{head.text} {name}", body, (head.start, _end_of(body, head.end)))
        return AstNode("Placeholder", f"{head.text} {name}", [], (head.start, head.end))

    def _try_funcdef(self) -> Optional[AstNode]:
        """NAME... NAME ( params ) { body }  -> FuncDef."""
        j = self.i
        names: list[_Tok] = []
        while j < len(self.toks) and (
            self.toks[j].type == "name"
            or (self.toks[j].type == "op" and self.toks[j].text in ("[", "]", "*", "::"))
        ):
            if self.toks[j].type == "name":
                names.append(self.toks[j])
            j += 1
        if not names or j >= len(self.toks) or self.toks[j].text != "(":
            return None
        depth = 0
        k = j
        while k < len(self.toks):
            t = self.toks[k]
            if t.type == "op" and t.text == "(":
                depth += 1
            elif t.type == "op" and t.text == ")":
                depth -= 1
                if depth == 0:
                    break
            k += 1
        if k + 1 >= len(self.toks) or self.toks[k + 1].text != "{":
            return None
        if len(names) < 2 and names[-1].text not in ("main",):
            return None
        head = self.toks[self.i]
        param_toks = self.toks[j + 1 : k]
        params = []
        for part in _split_on(param_toks, ","):
            part_names = [t for t in part if t.type == "name"]
            if part_names:
                params.append(AstNode("Var", part_names[-1].text, [], (part_names[-1].start, part_names[-1].end)))
        self.i = k + 2
        body = self.parse_stmts(until_brace=True)
        children = [AstNode("Group", "params", params, _span_of(params))] + body
        return AstNode("FuncDef", f"def {names[-1].text}", children, (head.start, _end_of(body, head.end)))


def _span_of(nodes: list[AstNode]) -> Optional[tuple[int, int]]:
    spans = [n.span for n in nodes if n.span is not None]
    if not spans:
        return None
    return (min(s[0] for s in spans), max(s[1] for s in spans))


def _end_of(nodes: list[AstNode], default: int) -> int:
    spans = [n.span for n in nodes if n.span is not None]
    if not spans:
        return default
    return max(s[1] for s in spans)


# --- entry point ------------------------------------------------------------


def parse_ast(snippet: CodeSnippet) -> AstNode:
    """Parse the snippet into a tolerant AST; never raises on content."""
    source = snippet.source
    module_span = (0, len(source)) if source else None
    if snippet.language == Language.UNKNOWN:
        toks = _lex(source, python_style=True)
        leaves = [
            AstNode("Token", t.text, [], (t.start, t.end)) for t in toks if t.type != "nl"
        ]
        return AstNode("Module", "", leaves, module_span)
    python_style = snippet.language == Language.PYTHON_LIKE
    toks = _lex(source, python_style=python_style)
    try:
        if python_style:
            parser = _PyParser(source, _logical_lines(source, toks))
            children = parser.parse_module()
        else:
            flat = [t for t in toks if t.type != "nl"]
            children = _CParser(flat).parse_stmts()
    except RecursionError:
        children = [AstNode("Placeholder", source, [], module_span)]
    return AstNode("Module", "", children, module_span)
