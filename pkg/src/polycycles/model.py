"""Model files: a parametric vector field plus one polycycle of it.

The format is flat sectioned text, `key = value` lines under `[section]`
headers, with `#` comments.  Sections:

    [params]     name = default            (exact rationals: 8/27, 1.5, -2)
    [field]      dot_x = expr, dot_y = expr (expression grammar of the
                 expressions module, variables x and y)
    [polycycle]  corners = (x,y) (x,y) ...  in traversal order
                 orientation = ccw | cw
    [sections]   h = 0.5, or base_anchor/base_direction/base_window for
                 models analyzed only through a raw return section
    [options]    numeric tolerances and grids

Orientation is declared redundantly on purpose: it is checked against
the signed area of the corner polygon at load time, and against the flow
direction along the first edge by a short integration when a model is
bound to parameter values.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import ExpressionError, ModelError
from .expressions import BivariatePolynomial, instantiate, parse_expression
from .flow import LineSection, field_callable, integrate

__all__ = ["ModelFile", "Model", "parse_model", "load_model", "bind"]

_SECTIONS = ("params", "field", "polycycle", "sections", "options")
_OPTION_KEYS = {
    "atol", "rtol", "t_max", "zero_tol",
    "s_lo", "s_hi", "samples", "fit_points",
}
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_CORNER_RE = re.compile(r"\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)")


@dataclass(frozen=True)
class ModelFile:
    """Parsed but unbound model: parameter defaults and raw structure."""

    params: tuple[tuple[str, Fraction], ...]
    dot_x: str
    dot_y: str
    corners: tuple[tuple[float, float], ...]
    orientation: str | None
    h: float | None
    base_section: LineSection | None
    options: tuple[tuple[str, float], ...]
    text: str
    path: str | None = None

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.params)

    def defaults(self) -> dict[str, Fraction]:
        return dict(self.params)

    def option(self, name: str, fallback: float) -> float:
        return dict(self.options).get(name, fallback)


@dataclass(frozen=True)
class Model:
    """A model file bound to concrete parameter values."""

    file: ModelFile
    values: dict[str, float]
    field_x: BivariatePolynomial
    field_y: BivariatePolynomial


def _number(token: str, where: str) -> Fraction:
    try:
        return Fraction(token.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ModelError(f"{where}: unreadable number {token.strip()!r}") from exc


def _parse_corners(value: str, where: str) -> tuple[tuple[float, float], ...]:
    matches = list(_CORNER_RE.finditer(value))
    if not matches:
        raise ModelError(f"{where}: expected a list of (x,y) pairs, got {value!r}")
    leftover = _CORNER_RE.sub("", value).strip()
    if leftover:
        raise ModelError(f"{where}: unparsed text {leftover!r} in corner list")
    return tuple(
        (float(_number(m.group(1), where)), float(_number(m.group(2), where)))
        for m in matches
    )


def _parse_pair(value: str, where: str) -> tuple[float, float]:
    m = _CORNER_RE.fullmatch(value.strip())
    if not m:
        raise ModelError(f"{where}: expected a pair (a,b), got {value!r}")
    return (float(_number(m.group(1), where)), float(_number(m.group(2), where)))


def _split_sections(text: str) -> dict[str, list[tuple[int, str, str]]]:
    sections: dict[str, list[tuple[int, str, str]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in _SECTIONS:
                raise ModelError(f"line {lineno}: unknown section [{current}]")
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ModelError(f"line {lineno}: content before the first [section] header")
        key, sep, value = line.partition("=")
        if not sep:
            raise ModelError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        sections[current].append((lineno, key.strip(), value.strip()))
    return sections


def parse_model(text: str, path: str | None = None) -> ModelFile:
    """Parse and statically validate a model file.

    Both field expressions are parsed under the declared parameters here,
    so a name error surfaces at load time, not at first bind.
    """
    sections = _split_sections(text)
    if "field" not in sections:
        raise ModelError("model has no [field] section")

    params: list[tuple[str, Fraction]] = []
    seen: set[str] = set()
    for lineno, key, value in sections.get("params", []):
        if not _NAME_RE.match(key):
            raise ModelError(f"line {lineno}: bad parameter name {key!r}")
        if key in ("x", "y"):
            raise ModelError(f"line {lineno}: parameter {key!r} shadows a field variable")
        if key in seen:
            raise ModelError(f"line {lineno}: duplicate parameter {key!r}")
        seen.add(key)
        params.append((key, _number(value, f"line {lineno}")))

    field: dict[str, str] = {}
    for lineno, key, value in sections["field"]:
        if key not in ("dot_x", "dot_y"):
            raise ModelError(f"line {lineno}: [field] keys are dot_x and dot_y, got {key!r}")
        if key in field:
            raise ModelError(f"line {lineno}: duplicate {key}")
        field[key] = value
    if set(field) != {"dot_x", "dot_y"}:
        raise ModelError("[field] must define both dot_x and dot_y")
    names = tuple(name for name, _ in params)
    for key in ("dot_x", "dot_y"):
        try:
            parse_expression(field[key], params=names)  # name/syntax check only
        except ExpressionError as exc:
            raise ModelError(f"[field] {key}: {exc}") from exc

    corners: tuple[tuple[float, float], ...] = ()
    orientation: str | None = None
    for lineno, key, value in sections.get("polycycle", []):
        if key == "corners":
            corners = _parse_corners(value, f"line {lineno}")
        elif key == "orientation":
            if value not in ("ccw", "cw"):
                raise ModelError(f"line {lineno}: orientation must be ccw or cw")
            orientation = value
        else:
            raise ModelError(f"line {lineno}: unknown [polycycle] key {key!r}")
    if "polycycle" in sections and not corners:
        raise ModelError("[polycycle] section is missing the corners list")
    if len(corners) != len(set(corners)):
        raise ModelError("corner list repeats a vertex")
    if corners and orientation is not None:
        area = _signed_area(corners)
        if abs(area) < 1e-12:
            raise ModelError("corner polygon is degenerate (zero signed area)")
        found = "ccw" if area > 0 else "cw"
        if found != orientation:
            raise ModelError(
                f"declared orientation {orientation} but the corner order is {found}")

    h: float | None = None
    base_anchor = base_direction = None
    base_window: tuple[float, float] | None = None
    for lineno, key, value in sections.get("sections", []):
        where = f"line {lineno}"
        if key == "h":
            h = float(_number(value, where))
            if not 0.0 < h:
                raise ModelError(f"{where}: h must be positive")
        elif key == "base_anchor":
            base_anchor = _parse_pair(value, where)
        elif key == "base_direction":
            base_direction = _parse_pair(value, where)
        elif key == "base_window":
            base_window = _parse_pair(value, where)
        else:
            raise ModelError(f"{where}: unknown [sections] key {key!r}")
    base_section = None
    if base_anchor is not None or base_direction is not None:
        if base_anchor is None or base_direction is None:
            raise ModelError("base_anchor and base_direction must be given together")
        base_section = LineSection.make(base_anchor, base_direction,
                                        base_window or (0.0, np.inf))

    options: list[tuple[str, float]] = []
    for lineno, key, value in sections.get("options", []):
        if key not in _OPTION_KEYS:
            known = ", ".join(sorted(_OPTION_KEYS))
            raise ModelError(f"line {lineno}: unknown option {key!r} (known: {known})")
        options.append((key, float(_number(value, f"line {lineno}"))))

    return ModelFile(params=tuple(params), dot_x=field["dot_x"], dot_y=field["dot_y"],
                     corners=corners, orientation=orientation, h=h,
                     base_section=base_section, options=tuple(options),
                     text=text, path=path)


def load_model(path: str) -> ModelFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    return parse_model(text, path=path)


def _signed_area(corners: Sequence[tuple[float, float]]) -> float:
    n = len(corners)
    total = 0.0
    for i in range(n):
        x0, y0 = corners[i]
        x1, y1 = corners[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return 0.5 * total


def merge_values(mf: ModelFile, overrides: Mapping[str, object] | None = None,
                 ) -> dict[str, Fraction]:
    """Defaults plus overrides, exact where the override is exact."""
    values = mf.defaults()
    for name, value in (overrides or {}).items():
        if name not in values:
            declared = ", ".join(mf.param_names) or "(none)"
            raise ModelError(f"unknown parameter {name!r}; declared: {declared}")
        values[name] = value if isinstance(value, Fraction) else _number(str(value),
                                                                         f"override {name}")
    return values


def bind(mf: ModelFile, overrides: Mapping[str, object] | None = None,
         check_flow: bool = True) -> Model:
    """Instantiate the field at parameter values and validate the traversal.

    The flow check integrates briefly from the midpoint of the first edge
    and requires motion toward the next corner; it catches fields whose
    actual rotation contradicts the declared corner order.
    """
    binding = merge_values(mf, overrides)
    names = mf.param_names
    fx = instantiate(parse_expression(mf.dot_x, params=names), binding)
    fy = instantiate(parse_expression(mf.dot_y, params=names), binding)
    model = Model(file=mf, values={k: float(v) for k, v in binding.items()},
                  field_x=fx, field_y=fy)
    if check_flow and mf.corners:
        _check_traversal(model)
    return model


def _check_traversal(model: Model) -> None:
    corners = model.file.corners
    a = np.asarray(corners[0], dtype=float)
    b = np.asarray(corners[1 % len(corners)], dtype=float)
    edge = b - a
    length = float(np.linalg.norm(edge))
    if length < 1e-12:
        raise ModelError("first polycycle edge has zero length")
    mid = 0.5 * (a + b)
    fun = field_callable(model.field_x, model.field_y)
    vel = np.asarray(fun(0.0, mid), dtype=float)
    speed = float(np.linalg.norm(vel))
    if speed < 1e-14:
        raise ModelError("field vanishes at the first edge midpoint; "
                         "cannot confirm traversal direction")
    # short integration: a fraction of the edge, bounded time
    t_span = min(0.05 * length / speed, 1.0)
    traj = integrate(fun, mid, t_span)
    moved = traj.states[-1] - mid
    along = float(np.dot(moved, edge)) / length
    if along <= 0.0:
        raise ModelError(
            "flow along the first edge runs against the declared corner order; "
            "reverse the corner list or fix the orientation")
    off_edge = float(np.linalg.norm(moved - (along / length) * edge))
    if off_edge > 1e-6 * max(1.0, abs(along)):
        raise ModelError(
            "first polycycle edge is not invariant under the flow "
            f"(transverse drift {off_edge:.3g})")


def with_path(mf: ModelFile, path: str) -> ModelFile:
    return replace(mf, path=path)
