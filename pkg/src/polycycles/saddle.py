"""Saddle normalization and Dulac-map coefficients.

Every polycycle corner is brought to the standard local form

    u' = u P(u, v),   v' = v Q(u, v),   P(0,0) > 0 > Q(0,0),

where the v-axis is the stable separatrix (incoming connection) and the
u-axis the unstable one (outgoing connection).  The hyperbolicity ratio is
lam = -Q(0,0)/P(0,0).  With transverse sections sigma1 (crossing the
stable axis) and sigma2 (crossing the unstable axis), the corner
transition map expands as

    D(s) = s^lam (D00 + second-order term + smaller),

and this module computes D00 together with the curvature-type quantities
S1, S2 that determine the second-order coefficients D10 = lam*D00*S1 and
D01 = -D00^2*S2.  The ingredients are the transition factors

    L1(w) = exp int_0^w (P(0,y)/Q(0,y) + 1/lam) dy/y
    L2(w) = exp int_0^w (Q(x,0)/P(x,0) + lam) dx/x

(the integrands have removable singularities at 0, resolved by series),
the derived functions M1 = L1 * d(P/Q)/du (0,v) and M2 = L2 * d(Q/P)/dv
(u,0), and an incomplete Mellin transform of M1 and M2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import DegeneracyError, ModelError, NumericError, PoleError, UnsupportedGeometryError
from .expressions import BivariatePolynomial
from .series import DEFAULT_ORDER, PowerSeries, ps_div, ps_exp, ps_integrate

QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-10, limit=10_000)


def _quad(fun, lo: float, hi: float) -> tuple[float, float]:
    # the explicit error-estimate checks below replace scipy's warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return quad(fun, lo, hi, **QUAD_OPTS)

# case-tag dead band around lam = 1 and pole dead band for Mellin orders
AT_ONE_BAND = 1e-9
MELLIN_POLE_BAND = 1e-6


# ---------------------------------------------------------------------------
# Local chart


@dataclass(frozen=True)
class LocalChart:
    """A saddle in the standard frame, with the affine map that produced it.

    ``linear`` is a signed permutation matrix and ``corner`` the saddle
    location in model coordinates: local = linear @ (model - corner).
    The local field is u' = u*p_poly(u,v), v' = v*q_poly(u,v); p_poly and
    q_poly are stored as BivariatePolynomial with (x, y) playing (u, v).
    """

    p_poly: BivariatePolynomial
    q_poly: BivariatePolynomial
    lam: float
    corner: tuple[float, float]
    linear: tuple[tuple[float, float], tuple[float, float]]
    n1: int = 0
    n2: int = 0

    def to_local(self, point) -> np.ndarray:
        a = np.asarray(self.linear, dtype=float)
        return a @ (np.asarray(point, dtype=float) - np.asarray(self.corner, dtype=float))

    def to_model(self, point_local) -> np.ndarray:
        a = np.asarray(self.linear, dtype=float)
        # signed permutation: inverse is the transpose
        return np.asarray(self.corner, dtype=float) + a.T @ np.asarray(point_local, dtype=float)

    def local_velocity(self, u: float, v: float) -> tuple[float, float]:
        return (u * self.p_poly.evaluate(u, v), v * self.q_poly.evaluate(u, v))

    def check_footprint(self, extent: float, samples: int = 33) -> None:
        """Sampled hypotheses P(x,0) > 0 and Q(0,y) < 0 up to ``extent``."""
        ts = np.linspace(0.0, extent, samples)
        for t in ts:
            if self.p_poly.evaluate(t, 0.0) <= 0.0:
                raise UnsupportedGeometryError(
                    f"P(x,0) not positive at x={t:.4g}; section footprint too large")
            if self.q_poly.evaluate(0.0, t) >= 0.0:
                raise UnsupportedGeometryError(
                    f"Q(0,y) not negative at y={t:.4g}; section footprint too large")


_AXES = {(1, 0): ("x", 1.0), (-1, 0): ("x", -1.0), (0, 1): ("y", 1.0), (0, -1): ("y", -1.0)}


def _axis_of(direction) -> tuple[str, float]:
    key = (int(round(direction[0])), int(round(direction[1])))
    if key not in _AXES or not (np.allclose(direction, key, atol=1e-12)):
        raise UnsupportedGeometryError(
            f"separatrix direction {tuple(direction)} is not axis-parallel")
    return _AXES[key]


def normalize_saddle(field_x: BivariatePolynomial, field_y: BivariatePolynomial,
                     corner, incoming, outgoing,
                     footprint: float = 0.55) -> LocalChart:
    """Build the LocalChart of a saddle with axis-parallel separatrices.

    ``incoming`` points from the corner toward the previous corner (along
    the stable separatrix), ``outgoing`` toward the next corner (unstable).
    Raises UnsupportedGeometryError when the invariant lines are missing or
    not axis-parallel, DegeneracyError when an eigenvalue vanishes.
    """
    a, b = float(corner[0]), float(corner[1])
    in_axis, in_sign = _axis_of(incoming)
    out_axis, out_sign = _axis_of(outgoing)
    if in_axis == out_axis:
        raise UnsupportedGeometryError("incoming and outgoing separatrices lie on the same axis")

    try:
        f1 = field_x.divide_linear("x", a)  # x' = (x-a) f1
    except ValueError as exc:
        raise UnsupportedGeometryError(f"line x={a:g} is not invariant: {exc}") from exc
    try:
        g1 = field_y.divide_linear("y", b)  # y' = (y-b) g1
    except ValueError as exc:
        raise UnsupportedGeometryError(f"line y={b:g} is not invariant: {exc}") from exc

    eig_x = f1.evaluate(a, b)
    eig_y = g1.evaluate(a, b)
    if abs(eig_x) <= 1e-12 or abs(eig_y) <= 1e-12:
        raise DegeneracyError(f"corner ({a:g},{b:g}) is not hyperbolic: "
                              f"eigenvalues ({eig_x:.3e}, {eig_y:.3e})")
    if eig_x * eig_y > 0.0:
        raise DegeneracyError(f"corner ({a:g},{b:g}) is not a saddle: "
                              f"eigenvalues ({eig_x:.3e}, {eig_y:.3e})")

    stable_eig = eig_x if in_axis == "x" else eig_y
    if stable_eig >= 0.0:
        raise UnsupportedGeometryError(
            f"incoming separatrix at ({a:g},{b:g}) lies on the unstable axis; "
            "the traversal opposes the flow (check the polycycle orientation)")

    # local = linear @ (model - corner); row 0 is the outgoing (u) axis
    row_u = (out_sign, 0.0) if out_axis == "x" else (0.0, out_sign)
    row_v = (in_sign, 0.0) if in_axis == "x" else (0.0, in_sign)
    linear = (row_u, row_v)

    # model coordinates as degree-1 polynomials of (u, v): inverse is transpose
    lin = np.asarray(linear)
    u_poly = BivariatePolynomial.variable("x")
    v_poly = BivariatePolynomial.variable("y")
    x_of = BivariatePolynomial.constant(a) + u_poly.scale(lin[0, 0]) + v_poly.scale(lin[1, 0])
    y_of = BivariatePolynomial.constant(b) + u_poly.scale(lin[0, 1]) + v_poly.scale(lin[1, 1])

    if out_axis == "x":
        p_loc = f1.compose_affine(x_of, y_of)
        q_loc = g1.compose_affine(x_of, y_of)
    else:
        p_loc = g1.compose_affine(x_of, y_of)
        q_loc = f1.compose_affine(x_of, y_of)

    p0 = p_loc.evaluate(0.0, 0.0)
    q0 = q_loc.evaluate(0.0, 0.0)
    if not (p0 > 0.0 and q0 < 0.0):
        raise UnsupportedGeometryError(
            f"normalized corner ({a:g},{b:g}) violates P(0,0)>0>Q(0,0): "
            f"P={p0:.3e}, Q={q0:.3e}")

    chart = LocalChart(p_poly=p_loc, q_poly=q_loc, lam=-q0 / p0,
                       corner=(a, b), linear=linear)
    chart.check_footprint(footprint)
    return chart


# ---------------------------------------------------------------------------
# Sections


def _poly1d(coeffs) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
    return arr


def _poly1d_eval(coeffs: np.ndarray, t: float) -> float:
    acc = 0.0
    for c in coeffs[::-1]:
        acc = acc * t + c
    return float(acc)


@dataclass(frozen=True)
class SectionPair:
    """Transverse sections in local coordinates, polynomial in s.

    sigma1 crosses the stable (v) axis, sigma2 the unstable (u) axis.
    Components are stored as ascending coefficient arrays.
    """

    sigma1_x: np.ndarray
    sigma1_y: np.ndarray
    sigma2_x: np.ndarray
    sigma2_y: np.ndarray

    @classmethod
    def make(cls, sigma1_x, sigma1_y, sigma2_x, sigma2_y) -> "SectionPair":
        pair = cls(_poly1d(sigma1_x), _poly1d(sigma1_y), _poly1d(sigma2_x), _poly1d(sigma2_y))
        pair.validate()
        return pair

    @classmethod
    def default(cls, h: float = 0.5) -> "SectionPair":
        # sigma1(s) = (s, h), sigma2(s) = (h, s)
        return cls.make([0.0, 1.0], [h], [h], [0.0, 1.0])

    def jet(self, section: int, component: int, order: int) -> float:
        """sigma_{section,component}^(order)(0): k-th derivative at s=0."""
        arrs = {(1, 1): self.sigma1_x, (1, 2): self.sigma1_y,
                (2, 1): self.sigma2_x, (2, 2): self.sigma2_y}
        arr = arrs[(section, component)]
        if order >= arr.size:
            return 0.0
        return float(arr[order] * math.factorial(order))

    def sigma1(self, s: float) -> tuple[float, float]:
        return (_poly1d_eval(self.sigma1_x, s), _poly1d_eval(self.sigma1_y, s))

    def sigma2(self, s: float) -> tuple[float, float]:
        return (_poly1d_eval(self.sigma2_x, s), _poly1d_eval(self.sigma2_y, s))

    def validate(self) -> None:
        if abs(self.jet(1, 1, 0)) > 1e-12 or self.jet(1, 2, 0) <= 0.0:
            raise ModelError("sigma1(0) must lie on the positive stable axis (0, y>0)")
        if abs(self.jet(2, 2, 0)) > 1e-12 or self.jet(2, 1, 0) <= 0.0:
            raise ModelError("sigma2(0) must lie on the positive unstable axis (x>0, 0)")
        if self.jet(1, 1, 1) <= 0.0:
            raise ModelError("sigma1 must point into the interior: d(sigma1_x)/ds(0) > 0")
        if self.jet(2, 2, 1) <= 0.0:
            raise ModelError("sigma2 must point into the interior: d(sigma2_y)/ds(0) > 0")


# ---------------------------------------------------------------------------
# Transition factors L1, L2 and the germs fed to the Mellin transform


@dataclass(frozen=True)
class Germ:
    """A smooth function germ at 0: a callable plus its Taylor series."""

    fun: Callable[[float], float]
    series: PowerSeries


_SERIES_SWITCH = 1e-3  # below this, integrands are evaluated by series


@dataclass(frozen=True)
class _Transition:
    integrand: Callable[[float], float]
    series: PowerSeries  # series of L itself

    def value(self, w: float) -> float:
        if w == 0.0:
            return 1.0
        val, err = _quad(self.integrand, 0.0, w)
        if not math.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
            raise NumericError(f"transition integral did not converge (err={err:.2e})")
        return math.exp(val)


def _restrict_series(poly: BivariatePolynomial, axis: str, order: int) -> PowerSeries:
    return PowerSeries.from_polynomial(poly.restrict(axis, 0.0), order)


def _transition_data(chart: LocalChart, which: int, order: int = DEFAULT_ORDER) -> _Transition:
    """Build integrand callable and series of L_which for the chart."""
    if which == 1:
        num = chart.p_poly.restrict("x", 0.0)   # P(0, v)
        den = chart.q_poly.restrict("x", 0.0)   # Q(0, v)
        shiftc = 1.0 / chart.lam
    elif which == 2:
        num = chart.q_poly.restrict("y", 0.0)   # Q(u, 0)
        den = chart.p_poly.restrict("y", 0.0)   # P(u, 0)
        shiftc = chart.lam
    else:
        raise ValueError("which must be 1 or 2")

    ratio = ps_div(PowerSeries.from_polynomial(num, order), PowerSeries.from_polynomial(den, order))
    shifted = ratio + PowerSeries.constant(shiftc, ratio.order)
    if abs(shifted.coeffs[0]) > 1e-9:
        raise NumericError(
            f"transition L{which}: constant term {shifted.coeffs[0]:.3e} fails to cancel; "
            "chart inconsistent with its hyperbolicity ratio")
    integrand_series = PowerSeries(shifted.coeffs[1:])  # (ratio + c)/t as a series

    num_arr, den_arr = _poly1d(num), _poly1d(den)

    def integrand(t: float) -> float:
        if abs(t) < _SERIES_SWITCH:
            return integrand_series.evaluate(t)
        return (_poly1d_eval(num_arr, t) / _poly1d_eval(den_arr, t) + shiftc) / t

    l_series = ps_exp(ps_integrate(integrand_series).truncate(order))
    return _Transition(integrand=integrand, series=l_series)


def transition_L(chart: LocalChart, which: int, u: float) -> tuple[float, PowerSeries]:
    """Value of L1 or L2 at u, plus the power series of L at 0."""
    data = _transition_data(chart, which)
    return data.value(u), data.series


def _m_germ(chart: LocalChart, which: int, trans: _Transition,
            order: int = DEFAULT_ORDER) -> Germ:
    """M1 = L1 * d(P/Q)/du at (0,v);  M2 = L2 * d(Q/P)/dv at (u,0)."""
    p, q = chart.p_poly, chart.q_poly
    if which == 1:
        num_poly = p.partial("x") * q - p * q.partial("x")
        num = num_poly.restrict("x", 0.0)
        den = (q * q).restrict("x", 0.0)
    else:
        num_poly = q.partial("y") * p - q * p.partial("y")
        num = num_poly.restrict("y", 0.0)
        den = (p * p).restrict("y", 0.0)

    ratio_series = ps_div(PowerSeries.from_polynomial(num, order),
                          PowerSeries.from_polynomial(den, order))
    m_series = trans.series * ratio_series
    num_arr, den_arr = _poly1d(num), _poly1d(den)

    def fun(w: float) -> float:
        return trans.value(w) * _poly1d_eval(num_arr, w) / _poly1d_eval(den_arr, w)

    return Germ(fun=fun, series=m_series)


# ---------------------------------------------------------------------------
# Incomplete Mellin transform


def _check_pole(alpha: float) -> None:
    nearest = round(alpha)
    if nearest >= 0 and abs(alpha - nearest) <= MELLIN_POLE_BAND:
        raise PoleError(f"Mellin order alpha={alpha!r} is within {MELLIN_POLE_BAND:g} "
                        f"of the pole at {int(nearest)}")


def mellin_hat(f: Germ, alpha: float, x: float) -> float:
    """Incomplete Mellin transform: the smooth solution of x g' - alpha g = f.

    Evaluated as the Taylor head sum_{i<k} c_i x^i/(i - alpha) plus
    |x|^alpha int_0^x (f - T_{k-1}f)(s) |s|^{-alpha} ds/s with k the Taylor
    order chosen above alpha + 1.
    """
    _check_pole(alpha)
    if x <= 0.0:
        raise ValueError("mellin_hat expects x > 0")
    k = max(0, math.ceil(alpha) + 2)
    coeffs = f.series.coeffs
    if k > coeffs.size:
        raise ValueError(f"germ series order {coeffs.size - 1} too low for alpha={alpha:g}")
    head = sum(coeffs[i] * x**i / (i - alpha) for i in range(k))

    switch = min(_SERIES_SWITCH * max(1.0, x), 0.5 * x)

    def tail(s: float) -> float:
        if s < switch:
            return f.series.tail_evaluate(s, k) * s**(-alpha - 1.0)
        taylor = 0.0
        for c in coeffs[k - 1:: -1] if k > 0 else []:
            taylor = taylor * s + c
        return (f.fun(s) - taylor) * s**(-alpha - 1.0)

    val, err = _quad(tail, 0.0, x)
    if err > 1e-6 * max(1.0, abs(val)):
        raise NumericError(f"Mellin tail quadrature did not converge (err={err:.2e})")
    return float(head + x**alpha * val)


# ---------------------------------------------------------------------------
# Dulac expansion


@dataclass(frozen=True)
class DulacExpansion:
    """Two-term asymptotic data of a Dulac-type map s^ratio(leading + ...).

    For a saddle corner, ``ratio`` is the hyperbolicity ratio and the next
    term sits at exponent ratio (below-one), at exponent 1 (above-one), or
    is unavailable at resonance (at-one corners carry leading data only).
    Composite maps reuse this container with their own next-term exponent;
    ``comp`` holds a compensator form when two exponents collide.
    """

    ratio: float
    leading: float
    case: str  # below-one | above-one | at-one
    next_exponent: float | None = None
    next_coeff: float | None = None
    comp: object | None = None  # CompensatorTerm of the calculus module
    ell: tuple[float, float] = (0.0, 1.0)
    s1: float | None = None
    s2: float | None = None
    notes: tuple[str, ...] = ()

    @property
    def d10(self) -> float | None:
        """Coefficient of s^1 (above-one saddles)."""
        if self.case == "above-one" and self.next_exponent == 1.0:
            return self.next_coeff
        return None

    @property
    def d01(self) -> float | None:
        """Coefficient of s^ratio (below-one saddles)."""
        if self.case == "below-one" and self.next_exponent == self.ratio:
            return self.next_coeff
        return None


def classify_ratio(lam: float, band: float = AT_ONE_BAND) -> str:
    if abs(lam - 1.0) <= band:
        return "at-one"
    return "below-one" if lam < 1.0 else "above-one"


def dulac_coefficients(chart: LocalChart, sections: SectionPair | None = None) -> DulacExpansion:
    """Compute the Dulac expansion of a corner for the given sections.

    The case-required second-order coefficient is always computed (its
    Mellin order cannot hit a pole away from lam = 1); the other S value
    is set to None when its pole guard trips.  At-one corners return
    leading data only, flagged in ``notes``.
    """
    if sections is None:
        sections = SectionPair.default()
    sections.validate()
    lam = chart.lam
    s111 = sections.jet(1, 1, 1)
    s112 = sections.jet(1, 1, 2)
    s120 = sections.jet(1, 2, 0)
    s121 = sections.jet(1, 2, 1)
    s210 = sections.jet(2, 1, 0)
    s211 = sections.jet(2, 1, 1)
    s221 = sections.jet(2, 2, 1)
    s222 = sections.jet(2, 2, 2)

    chart.check_footprint(max(s120, s210) * 1.05)

    t1 = _transition_data(chart, 1)
    t2 = _transition_data(chart, 2)
    l1 = t1.value(s120)
    l2 = t2.value(s210)
    d00 = (s111**lam * s120 / l1**lam) * (l2 / (s221 * s210**lam))

    case = classify_ratio(lam)
    if case == "at-one":
        return DulacExpansion(
            ratio=lam, leading=d00, case=case, ell=(1.0, 2.0),
            notes=("at-one corner: second-order coefficients are resonant "
                   "(Mellin pole at alpha=1); leading term only",))

    pq_at = (chart.p_poly.evaluate(0.0, s120) / chart.q_poly.evaluate(0.0, s120))
    qp_at = (chart.q_poly.evaluate(s210, 0.0) / chart.p_poly.evaluate(s210, 0.0))

    def s1_value() -> float:
        m1 = _m_germ(chart, 1, t1)
        return (s112 / (2.0 * s111) - (s121 / s120) * pq_at
                - (s111 / l1) * mellin_hat(m1, 1.0 / lam, s120))

    def s2_value() -> float:
        m2 = _m_germ(chart, 2, t2)
        return (s222 / (2.0 * s221) - (s211 / s210) * qp_at
                - (s221 / l2) * mellin_hat(m2, lam, s210))

    notes: list[str] = []
    if case == "below-one":
        s2 = s2_value()  # alpha = lam in (0,1): pole-free
        try:
            s1 = s1_value()
        except PoleError as exc:
            s1, msg = None, str(exc)
            notes.append(f"S1 unavailable: {msg}")
        d01 = -(d00**2) * s2
        return DulacExpansion(ratio=lam, leading=d00, case=case,
                              next_exponent=lam, next_coeff=d01,
                              ell=(lam, min(2.0 * lam, 1.0)),
                              s1=s1, s2=s2, notes=tuple(notes))

    s1 = s1_value()  # alpha = 1/lam in (0,1): pole-free
    try:
        s2 = s2_value()
    except PoleError as exc:
        s2 = None
        notes.append(f"S2 unavailable: {exc}")
    d10 = lam * d00 * s1
    return DulacExpansion(ratio=lam, leading=d00, case=case,
                          next_exponent=1.0, next_coeff=d10,
                          ell=(1.0, min(lam, 2.0)),
                          s1=s1, s2=s2, notes=tuple(notes))
