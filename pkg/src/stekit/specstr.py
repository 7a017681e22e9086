"""Parse and print stack notation such as ``"(2:1)-(2:1)"``.

Grammar::

    stack  := part ["|" part] ["@" ("before" | "after" | "both")]
    part   := layer ("-" layer)*
    layer  := "(" INT ":" INT ("," ("w" | "s") "=" INT)* ")"

``w``/``s`` override the window and stride (defaults 2 and 1). A ``|``
separates layers placed before the projector from those placed after it,
which implies ``@both``. Canonical output omits defaults and ``@before``.
"""

from __future__ import annotations

from .errors import SpecParseError
from .ste import LayerSpec, StackSpec

DEFAULT_WINDOW = 2
DEFAULT_STRIDE = 1


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def fail(self, msg):
        raise SpecParseError(msg, self.text, self.pos)

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch):
        if self.peek() != ch:
            found = repr(self.text[self.pos]) if self.pos < len(self.text) else "end of input"
            self.fail(f"expected {ch!r}, found {found}")
        self.pos += 1

    def integer(self):
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            self.fail("expected an integer")
        value = int(self.text[start:self.pos])
        if value < 1:
            self.pos = start
            self.fail("expected a positive integer")
        return value

    def word(self):
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isalpha():
            self.pos += 1
        return self.text[start:self.pos], start

    def layer(self):
        self.expect("(")
        t_u = self.integer()
        self.expect(":")
        t_o = self.integer()
        opts = {"w": DEFAULT_WINDOW, "s": DEFAULT_STRIDE}
        seen = set()
        while self.peek() == ",":
            self.pos += 1
            key, at = self.word()
            if key not in opts or key in seen:
                self.pos = at
                self.fail(f"expected 'w' or 's' override, found {key or 'nothing'!r}")
            seen.add(key)
            self.expect("=")
            opts[key] = self.integer()
        self.expect(")")
        return LayerSpec(t_u, t_o, opts["w"], opts["s"])

    def part(self):
        layers = [self.layer()]
        while self.peek() == "-":
            self.pos += 1
            layers.append(self.layer())
        return layers

    def stack(self, activation):
        before = self.part()
        after = []
        if self.peek() == "|":
            self.pos += 1
            after = self.part()
        insertion = "both" if after else "before"
        if self.peek() == "@":
            self.pos += 1
            name, at = self.word()
            if name not in ("before", "after", "both"):
                self.pos = at
                self.fail(f"unknown insertion {name!r}")
            if after and name != "both":
                self.pos = at
                self.fail(f"'|' placement conflicts with @{name}")
            if name == "both" and not after:
                self.pos = at
                self.fail("@both needs a '|' between before- and after-projector layers")
            insertion = name
        if self.peek():
            self.fail(f"unexpected {self.text[self.pos]!r}")
        split = len(before) if insertion == "both" else None
        return StackSpec(tuple(before + after), insertion, activation, split)


def parse_stack(text: str, activation: str = "none") -> StackSpec:
    return _Parser(text).stack(activation)


def format_layer(spec: LayerSpec) -> str:
    extra = ""
    if spec.t_w != DEFAULT_WINDOW:
        extra += f",w={spec.t_w}"
    if spec.t_s != DEFAULT_STRIDE:
        extra += f",s={spec.t_s}"
    return f"({spec.t_u}:{spec.t_o}{extra})"


def format_stack(stack: StackSpec) -> str:
    if stack.insertion == "both":
        return ("-".join(map(format_layer, stack.before)) + "|" +
                "-".join(map(format_layer, stack.after)))
    body = "-".join(map(format_layer, stack.layers))
    return body + ("@after" if stack.insertion == "after" else "")
