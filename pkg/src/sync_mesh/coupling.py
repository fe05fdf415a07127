"""Phase coupling functions on the circle.

Three families are provided: the "tanlock" family, piecewise-polynomial
couplings of degree p, and plain sine.  Tanlock and piecewise-polynomial
couplings are compliant designs (odd, C1, unit slope at zero, slope sign
following sign(cos(theta) - cos(b))).  Sine is carried along as the
classical baseline; it has b = pi/2 built in, which is too large once a
network has 4 or more vertices, and validators flag it rather than
reject it.

Angles are plain floats (or arrays); every evaluation wraps its argument
to (-pi, pi] first, which is the single point where circle topology
enters the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import BOutOfRange, InvalidRange, NoBreakpointRoot
from .validation import ValidationReport

__all__ = [
    "wrap_angle",
    "CouplingFn",
    "TanlockCoupling",
    "PolyCoupling",
    "SineCoupling",
    "make_tanlock",
    "make_piecewise_poly",
    "make_sine",
    "eval_potential",
    "validate_coupling",
    "coupling_from_config",
]


def wrap_angle(theta):
    """Wrap angles to the interval (-pi, pi]."""
    w = np.pi - np.remainder(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)
    return w


class CouplingFn:
    """Common interface: value f, slope f', potential Psi (min 0 at 0)."""

    kind: str = ""
    b: float = 0.0
    compliant: bool = True

    def value(self, theta):
        raise NotImplementedError

    def slope(self, theta):
        raise NotImplementedError

    def potential(self, theta):
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Positive angles where f' may have one-sided limits (plus pi)."""
        return (math.pi,)

    def slope_limits(self, at: float) -> tuple[float, float]:
        """One-sided slope limits (left, right) at a breakpoint angle."""
        return (float(self.slope(at)), float(self.slope(at)))

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class TanlockCoupling(CouplingFn):
    """f(theta) = (1 - cos b) sin(theta) / (1 - cos b cos theta)."""

    b: float
    kind = "tanlock"
    compliant = True

    def value(self, theta):
        t = wrap_angle(theta)
        c = math.cos(self.b)
        return (1.0 - c) * np.sin(t) / (1.0 - c * np.cos(t))

    def slope(self, theta):
        t = wrap_angle(theta)
        c = math.cos(self.b)
        return (1.0 - c) * (np.cos(t) - c) / (1.0 - c * np.cos(t)) ** 2

    def potential(self, theta):
        # Antiderivative of f with Psi(0) = 0, which is also its minimum.
        t = wrap_angle(theta)
        c = math.cos(self.b)
        if abs(c) < 1e-12:
            return 1.0 - np.cos(t)
        return ((1.0 - c) / c) * (np.log1p(-c * np.cos(t)) - np.log1p(-c))

    def to_config(self) -> dict:
        return {"kind": "tanlock", "b": self.b}


@dataclass(frozen=True)
class PolyCoupling(CouplingFn):
    """Piecewise-polynomial coupling of degree p.

    On [-theta_br, theta_br] the slope is 1 - (|theta|/b)^(p-1); outside,
    the function continues linearly with the (negative) slope it reached
    at theta_br.  The breakpoint theta_br is the root of
    f(t) + f'(t) (pi - t) = 0 on (b, pi), which makes f(pi) = 0 and hence
    f continuous and C1 on the whole circle.
    """

    p: int
    b: float
    theta_br: float
    s_out: float
    kind = "poly"
    compliant = True

    def _inner_value(self, t):
        return t * (1.0 - np.abs(t) ** (self.p - 1) / (self.p * self.b ** (self.p - 1)))

    def _inner_slope(self, t):
        return 1.0 - (np.abs(t) / self.b) ** (self.p - 1)

    def value(self, theta):
        t = wrap_angle(theta)
        a = np.abs(t)
        inner = self._inner_value(t)
        f_br = self._inner_value(self.theta_br)
        outer = np.sign(t) * (f_br + self.s_out * (a - self.theta_br))
        return np.where(a <= self.theta_br, inner, outer)

    def slope(self, theta):
        t = wrap_angle(theta)
        a = np.abs(t)
        return np.where(a <= self.theta_br, self._inner_slope(t), self.s_out)

    def potential(self, theta):
        t = wrap_angle(theta)
        a = np.abs(t)
        p, b, tb = self.p, self.b, self.theta_br
        inner = a ** 2 / 2.0 - a ** (p + 1) / ((p + 1) * p * b ** (p - 1))
        psi_br = tb ** 2 / 2.0 - tb ** (p + 1) / ((p + 1) * p * b ** (p - 1))
        f_br = self._inner_value(tb)
        outer = psi_br + f_br * (a - tb) + 0.5 * self.s_out * (a - tb) ** 2
        return np.where(a <= tb, inner, outer)

    def breakpoints(self) -> tuple[float, ...]:
        return (self.theta_br, math.pi)

    def slope_limits(self, at: float) -> tuple[float, float]:
        if abs(at - self.theta_br) < 1e-12:
            return (float(self._inner_slope(self.theta_br)), self.s_out)
        if abs(at - math.pi) < 1e-12:
            # Left limit is the outer slope; approaching from -pi gives the
            # same value because f' is even.
            return (self.s_out, self.s_out)
        return super().slope_limits(at)

    def to_config(self) -> dict:
        return {"kind": "poly", "b": self.b, "p": self.p}


@dataclass(frozen=True)
class SineCoupling(CouplingFn):
    """Classical sinusoidal coupling; equals tanlock at b = pi/2."""

    b: float = math.pi / 2.0
    kind = "sine"
    compliant = False

    def value(self, theta):
        return np.sin(wrap_angle(theta))

    def slope(self, theta):
        return np.cos(wrap_angle(theta))

    def potential(self, theta):
        return 1.0 - np.cos(wrap_angle(theta))

    def to_config(self) -> dict:
        return {"kind": "sine"}


def make_tanlock(b: float) -> TanlockCoupling:
    if not (0.0 < b < math.pi):
        raise BOutOfRange(f"tanlock needs b in (0, pi), got {b}")
    return TanlockCoupling(b=float(b))


def make_piecewise_poly(p: int, b: float) -> PolyCoupling:
    """Degree-p piecewise-polynomial coupling with breakpoint solved to 1e-14."""
    if int(p) != p or p < 2:
        raise InvalidRange(f"polynomial degree must be an integer >= 2, got {p}")
    if not (0.0 < b < math.pi):
        raise BOutOfRange(f"piecewise poly needs b in (0, pi), got {b}")
    p = int(p)

    def f_in(t):
        return t * (1.0 - t ** (p - 1) / (p * b ** (p - 1)))

    def fp_in(t):
        return 1.0 - (t / b) ** (p - 1)

    def g(t):
        # Linear continuation from t must hit zero at pi.
        return f_in(t) + fp_in(t) * (math.pi - t)

    ts = np.linspace(b, math.pi, 4097)
    gs = np.array([g(t) for t in ts])
    sign_change = np.where(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0)[0]
    if len(sign_change) == 0:
        raise NoBreakpointRoot(
            f"no breakpoint in ({b}, pi) for p={p}; b is too close to pi")
    lo, hi = ts[sign_change[0]], ts[sign_change[0] + 1]
    glo = g(lo)
    for _ in range(100):  # runs down to adjacent floats; f(pi)=0 then holds to ~1e-14
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        gm = g(mid)
        if glo * gm <= 0:
            hi = mid
        else:
            lo, glo = mid, gm
    tb = 0.5 * (lo + hi)
    return PolyCoupling(p=p, b=float(b), theta_br=float(tb), s_out=float(fp_in(tb)))


def make_sine() -> SineCoupling:
    return SineCoupling()


def eval_potential(c: CouplingFn, theta):
    """Potential Psi with dPsi/dtheta = f and min Psi = 0."""
    return c.potential(theta)


def validate_coupling(c: CouplingFn, n_max: int) -> ValidationReport:
    """Check oddness, C1 continuity, the slope sign pattern and the b bound.

    The b bound b <= pi/(n_max - 1) is reported at warning severity: a
    failing bound identifies a coupling that cannot be certified for
    networks of up to n_max vertices, but runs with it are still legal
    (that is exactly how the sine baseline is exercised).
    """
    if n_max < 2:
        raise InvalidRange(f"n_max must be >= 2, got {n_max}")
    rep = ValidationReport(subject=f"coupling {c.kind} (b={c.b:.6g})")

    thetas = np.linspace(-math.pi, math.pi, 1024, endpoint=False)
    odd_err = float(np.abs(c.value(thetas) + c.value(-thetas)).max())
    rep.add("odd", odd_err < 1e-12, f"max |f(t)+f(-t)| = {odd_err:.2e}")

    worst_gap = abs(float(c.value(math.pi)))  # circle continuity needs f(pi) = 0
    for br in c.breakpoints():
        left, right = c.slope_limits(br)
        worst_gap = max(worst_gap, abs(left - right))
    rep.add("c1_breakpoints", worst_gap < 1e-10, f"worst mismatch = {worst_gap:.2e}")

    unit = abs(float(c.slope(0.0)) - 1.0)
    rep.add("unit_slope_at_zero", unit < 1e-12, f"|f'(0)-1| = {unit:.2e}")

    cb = math.cos(c.b)
    mask = np.abs(np.cos(thetas) - cb) > 1e-6
    signs = c.slope(thetas[mask]) * (np.cos(thetas[mask]) - cb)
    rep.add("a5_sign_pattern", bool((signs > 0).all()),
            f"min f'(t)(cos t - cos b) = {float(signs.min()):.2e}")

    bound = math.pi / (n_max - 1)
    rep.add("b_within_bound", c.b <= bound + 1e-15,
            f"b = {c.b:.6g}, bound pi/(n_max-1) = {bound:.6g}", severity="warning")
    return rep


def coupling_from_config(cfg: dict | str) -> CouplingFn:
    """Build a coupling from {"kind": ..., "b": ..., "p": ...}."""
    if isinstance(cfg, str):
        cfg = json.loads(cfg)
    kind = cfg.get("kind")
    if kind == "tanlock":
        return make_tanlock(cfg["b"])
    if kind == "poly":
        return make_piecewise_poly(cfg["p"], cfg["b"])
    if kind == "sine":
        return make_sine()
    raise InvalidRange(f"unknown coupling kind {kind!r}")
