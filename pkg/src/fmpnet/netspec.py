"""Parser and size calculator for the layer-shorthand network notation.

Grammar (ASCII):

    spec  := item ('-' item)* '-' 'output'
    item  := group | layer
    group := '(' layer ('-' layer)* ')' 'x' INT
    layer := [INT ['n']] 'C' INT
           | 'FMP' '(' alpha ')' [':' mode ':' kind]
           | 'MP2'
    alpha := INT '^' INT '/' INT | DECIMAL
    mode  := 'disjoint' | 'overlap'
    kind  := 'random' | 'pseudo'

"32C2" is a 2x2 convolution with 32 filters.  "32nC2" starts a linear filter
schedule: the k-th convolution of the network gets 32*k filters, and bare
C-layers after such a group continue the schedule.  "(...)xK" repeats its
body K times.  FMP mode/kind default to overlap/pseudo when omitted.

Spatial sizes are computed right-to-left from output size 1: a Cf layer adds
f-1, MP2 doubles, and FMP(alpha) multiplies by alpha rounded to the nearest
integer (ties round up).  The leftmost value is the required input size.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace

from .regions import Mode


class SpecSyntaxError(ValueError):
    """Malformed network-shorthand text; message carries the offending token."""


DEFAULT_MODE = Mode.OVERLAPPING
DEFAULT_KIND = "pseudo"

_ALPHA_RADICAL = re.compile(r"^(\d+)\^(\d+)/(\d+)$")
_ALPHA_DECIMAL = re.compile(r"^\d+(\.\d+)?$")
_CONV = re.compile(r"^(?:(\d+)(n?))?C(\d+)$")
_FMP = re.compile(r"^FMP\((.+)\)(?::(disjoint|overlap):(random|pseudo))?$")
_GROUP = re.compile(r"^\((.+)\)x(\d+)$")


@dataclass(frozen=True)
class Alpha:
    """Pooling ratio kept in exact descriptor form until size computation.

    Either a radical base^(num/den) or a plain decimal value.
    """

    base: int | None = None
    exp_num: int | None = None
    exp_den: int | None = None
    decimal: float | None = None

    @property
    def value(self) -> float:
        if self.decimal is not None:
            return self.decimal
        return self.base ** (self.exp_num / self.exp_den)

    def __str__(self) -> str:
        if self.decimal is not None:
            return repr(self.decimal)
        return f"{self.base}^{self.exp_num}/{self.exp_den}"


@dataclass(frozen=True)
class ConvSpec:
    filters: int
    filter_size: int


@dataclass(frozen=True)
class FmpSpec:
    alpha: Alpha
    mode: Mode = DEFAULT_MODE
    kind: str = DEFAULT_KIND  # 'random' | 'pseudo'


@dataclass(frozen=True)
class Mp2Spec:
    pass


@dataclass(frozen=True)
class OutputSpec:
    pass


LayerSpec = ConvSpec | FmpSpec | Mp2Spec | OutputSpec


@dataclass(frozen=True)
class NetworkSpec:
    """Expanded layer list plus (once computed) per-layer spatial sizes.

    spatial_sizes[i] is the side length entering layers[i]; the size entering
    the output layer is always 1 and input_size is spatial_sizes[0].
    """

    layers: tuple[LayerSpec, ...]
    spatial_sizes: tuple[int, ...] | None = None

    @property
    def n_hidden(self) -> int:
        return sum(isinstance(l, ConvSpec) for l in self.layers)

    @property
    def input_size(self) -> int:
        if self.spatial_sizes is None:
            raise ValueError("spatial sizes not computed; call compute_sizes first")
        return self.spatial_sizes[0]


def _parse_alpha(text: str, where: str) -> Alpha:
    m = _ALPHA_RADICAL.match(text)
    if m:
        alpha = Alpha(base=int(m.group(1)), exp_num=int(m.group(2)), exp_den=int(m.group(3)))
    elif _ALPHA_DECIMAL.match(text):
        alpha = Alpha(decimal=float(text))
    else:
        raise SpecSyntaxError(f"bad FMP ratio {text!r} in {where!r}")
    if not (1 < alpha.value < 3):
        raise SpecSyntaxError(f"FMP ratio must lie in (1,3), got {text!r} = {alpha.value:g}")
    return alpha


def _split_top(text: str, where: str) -> list[str]:
    """Split on '-' at parenthesis depth zero."""
    items, depth, start = [], 0, 0
    for pos, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise SpecSyntaxError(f"unbalanced ')' at position {pos} in {where!r}")
        elif ch == "-" and depth == 0:
            items.append(text[start:pos])
            start = pos + 1
    if depth != 0:
        raise SpecSyntaxError(f"unbalanced '(' in {where!r}")
    items.append(text[start:])
    if any(not it for it in items):
        raise SpecSyntaxError(f"empty item in {where!r}")
    return items


class _Expander:
    """Walks tokens, expanding groups and the linear filter schedule."""

    def __init__(self, default_mode: Mode, default_kind: str):
        self.default_mode = default_mode
        self.default_kind = default_kind
        self.layers: list[LayerSpec] = []
        self.filter_base: int | None = None
        self.conv_ordinal = 0

    def layer(self, token: str):
        m = _CONV.match(token)
        if m:
            count, linear, fsize = m.group(1), m.group(2), int(m.group(3))
            if fsize < 1:
                raise SpecSyntaxError(f"filter size must be >= 1 in {token!r}")
            self.conv_ordinal += 1
            if count is not None and linear == "n":
                self.filter_base = int(count)
                filters = self.filter_base * self.conv_ordinal
            elif count is not None:
                filters = int(count)
            else:
                if self.filter_base is None:
                    raise SpecSyntaxError(
                        f"bare layer {token!r} has no preceding 'n' filter schedule")
                filters = self.filter_base * self.conv_ordinal
            if filters < 1:
                raise SpecSyntaxError(f"filter count must be >= 1 in {token!r}")
            self.layers.append(ConvSpec(filters, fsize))
            return
        m = _FMP.match(token)
        if m:
            alpha = _parse_alpha(m.group(1), token)
            mode = Mode(m.group(2)) if m.group(2) else self.default_mode
            kind = m.group(3) if m.group(3) else self.default_kind
            self.layers.append(FmpSpec(alpha, mode, kind))
            return
        if token == "MP2":
            self.layers.append(Mp2Spec())
            return
        raise SpecSyntaxError(f"unrecognized layer token {token!r}")

    def item(self, token: str):
        m = _GROUP.match(token)
        if m:
            body, reps = m.group(1), int(m.group(2))
            if reps < 1:
                raise SpecSyntaxError(f"repetition count must be >= 1 in {token!r}")
            inner = _split_top(body, token)
            for _ in range(reps):
                for tok in inner:
                    self.layer(tok)
        else:
            self.layer(token)


def parse_spec(text: str, default_mode: Mode = DEFAULT_MODE,
               default_kind: str = DEFAULT_KIND) -> NetworkSpec:
    """Parse shorthand text into an expanded, unsized NetworkSpec."""
    stripped = re.sub(r"\s+", "", text)
    if not stripped:
        raise SpecSyntaxError("empty network text")
    items = _split_top(stripped, text)
    if items[-1] != "output":
        raise SpecSyntaxError("network text must end with 'output'")
    exp = _Expander(default_mode, default_kind)
    for tok in items[:-1]:
        exp.item(tok)
    exp.layers.append(OutputSpec())
    return NetworkSpec(tuple(exp.layers))


def nearest_int(x: float) -> int:
    """Round to nearest; exact halves round up."""
    return math.floor(x + 0.5)


def compute_sizes(spec: NetworkSpec) -> NetworkSpec:
    """Attach spatial sizes, working right-to-left from output size 1."""
    size = 1
    sizes: list[int] = []
    for layer in reversed(spec.layers):
        if isinstance(layer, OutputSpec):
            size = 1
        elif isinstance(layer, ConvSpec):
            size += layer.filter_size - 1
        elif isinstance(layer, Mp2Spec):
            size *= 2
        elif isinstance(layer, FmpSpec):
            size = nearest_int(size * layer.alpha.value)
        sizes.append(size)
    return replace(spec, spatial_sizes=tuple(reversed(sizes)))


def format_spec(spec: NetworkSpec) -> str:
    """Canonical expanded text; parse(format(s)) is structurally equal to s."""
    parts = []
    for layer in spec.layers:
        if isinstance(layer, ConvSpec):
            parts.append(f"{layer.filters}C{layer.filter_size}")
        elif isinstance(layer, FmpSpec):
            text = f"FMP({layer.alpha})"
            if layer.mode is not DEFAULT_MODE or layer.kind != DEFAULT_KIND:
                text += f":{layer.mode.value}:{layer.kind}"
            parts.append(text)
        elif isinstance(layer, Mp2Spec):
            parts.append("MP2")
        elif isinstance(layer, OutputSpec):
            parts.append("output")
    return "-".join(parts)
