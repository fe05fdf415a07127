"""Per-vertex frequency functions, the shared scaling function, and the
derived maps that predict the synchronized frequency.

For oscillator i the composed map sigma_i = chi_i o zeta sends a filter
state to an instantaneous frequency.  Both building blocks are strictly
increasing C1 maps, so sigma_i is too, and its open image is exactly the
set of frequencies vertex i can produce.  The network-level objects are

    J        intersection of the sigma images (must be nonempty),
    beta(s)  sum_i q_i sigma_i^{-1}(s), strictly increasing, beta(J) = R,
    alpha(r) the unique filter vector with all frequencies equal and
             q^T alpha(r) = r,

with q the unit vector along C^{-1} 1.  alpha parametrizes the set of
frequency-synchronized filter states, and beta^{-1}(r) is the
synchronized frequency on the invariant leaf with q^T gamma = r.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AssumptionA7Violated,
    InvalidRange,
    MalformedBank,
    NonPositiveGain,
    OutOfImage,
    OutOfJ,
)
from .validation import ValidationReport

__all__ = [
    "AffineFreq",
    "SaturatingFreq",
    "IdentityScale",
    "LogisticScale",
    "OscBank",
    "eval_sigma",
    "invert_sigma",
    "beta",
    "beta_inverse",
    "alpha",
    "validate_bank",
    "bank_from_config",
]

_INF = float("inf")


def _softplus(x):
    return np.logaddexp(0.0, x)


def _expit(x):
    # Stable logistic sigmoid.
    out = np.empty_like(np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# --- frequency functions chi ----------------------------------------------

@dataclass(frozen=True)
class AffineFreq:
    """chi(u) = omega + k u with k > 0."""

    omega: float
    k: float
    kind = "affine"

    def __post_init__(self):
        if not self.k > 0:
            raise InvalidRange(f"affine slope k = {self.k} must be > 0")

    def value(self, u):
        return self.omega + self.k * np.asarray(u, dtype=float)

    def slope(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.k)

    def inverse(self, y):
        return (np.asarray(y, dtype=float) - self.omega) / self.k

    def image(self, lo=-_INF, hi=_INF):
        a = self.omega + self.k * lo if math.isfinite(lo) else -_INF
        b = self.omega + self.k * hi if math.isfinite(hi) else _INF
        return (a, b)

    def to_config(self):
        return {"kind": "affine", "omega": self.omega, "k": self.k}


@dataclass(frozen=True)
class SaturatingFreq:
    """chi(u) = lo + (hi - lo) / (1 + exp(-s (u - u0))), image (lo, hi)."""

    lo: float
    hi: float
    u0: float
    s: float
    kind = "saturating"

    def __post_init__(self):
        if not (self.hi > self.lo and self.s > 0):
            raise InvalidRange(
                f"saturating needs hi > lo and s > 0, got ({self.lo}, {self.hi}, s={self.s})")

    def value(self, u):
        u = np.asarray(u, dtype=float)
        return self.lo + (self.hi - self.lo) * _expit(self.s * (u - self.u0))

    def slope(self, u):
        u = np.asarray(u, dtype=float)
        g = _expit(self.s * (u - self.u0))
        return (self.hi - self.lo) * self.s * g * (1.0 - g)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        return self.u0 + np.log((y - self.lo) / (self.hi - y)) / self.s

    def image(self, lo=-_INF, hi=_INF):
        a = float(self.value(lo)) if math.isfinite(lo) else self.lo
        b = float(self.value(hi)) if math.isfinite(hi) else self.hi
        return (a, b)

    def to_config(self):
        return {"kind": "saturating", "lo": self.lo, "hi": self.hi,
                "u0": self.u0, "s": self.s}


# --- scaling functions zeta -------------------------------------------------

@dataclass(frozen=True)
class IdentityScale:
    kind = "identity"

    def value(self, g):
        return np.asarray(g, dtype=float)

    def slope(self, g):
        return np.ones_like(np.asarray(g, dtype=float))

    def inverse(self, u):
        return np.asarray(u, dtype=float)

    image = (-_INF, _INF)

    def to_config(self):
        return {"kind": "identity"}


@dataclass(frozen=True)
class LogisticScale:
    """Squeezes R into the open interval (lo, hi)."""

    lo: float
    hi: float
    center: float = 0.0
    rate: float = 1.0
    kind = "logistic"

    def __post_init__(self):
        if not (self.hi > self.lo and self.rate > 0):
            raise InvalidRange(
                f"logistic needs hi > lo and rate > 0, got ({self.lo}, {self.hi}, rate={self.rate})")

    def value(self, g):
        g = np.asarray(g, dtype=float)
        return self.lo + (self.hi - self.lo) * _expit(self.rate * (g - self.center))

    def slope(self, g):
        g = np.asarray(g, dtype=float)
        e = _expit(self.rate * (g - self.center))
        return (self.hi - self.lo) * self.rate * e * (1.0 - e)

    def inverse(self, u):
        u = np.asarray(u, dtype=float)
        return self.center + np.log((u - self.lo) / (self.hi - u)) / self.rate

    @property
    def image(self):
        return (self.lo, self.hi)

    def to_config(self):
        return {"kind": "logistic", "lo": self.lo, "hi": self.hi,
                "center": self.center, "rate": self.rate}


# --- the bank ---------------------------------------------------------------

class OscBank:
    """Frequency functions, shared scaling, constraint interval and gains.

    All evaluations broadcast over leading axes: gamma of shape (..., n)
    gives results of the same shape.  The bank is immutable after
    construction and safe to share.
    """

    def __init__(self, freq_fns, zeta, constraint=( -_INF, _INF), c=None):
        self.freq_fns = tuple(freq_fns)
        self.n = len(self.freq_fns)
        if self.n < 1:
            raise InvalidRange("bank needs at least one oscillator")
        self.zeta = zeta
        self.constraint = (float(constraint[0]), float(constraint[1]))
        c = np.ones(self.n) if c is None else np.array(c, dtype=float)
        if c.shape != (self.n,):
            raise NonPositiveGain(f"expected {self.n} gains, got shape {c.shape}")
        if (c <= 0).any():
            i = int(np.where(c <= 0)[0][0])
            raise NonPositiveGain(f"gain c_{i + 1} = {c[i]} must be > 0")
        c.setflags(write=False)
        self.c = c
        cinv = 1.0 / c
        self.q = cinv / np.linalg.norm(cinv)
        self._varpi = None
        self._g0 = None
        # Stacked parameters when every oscillator shares one kind; this keeps
        # sigma evaluation to a handful of array ops inside integration loops.
        kinds = {fn.kind for fn in self.freq_fns}
        self._stack = None
        if kinds == {"affine"}:
            self._stack = ("affine",
                           np.array([fn.omega for fn in self.freq_fns]),
                           np.array([fn.k for fn in self.freq_fns]))
        elif kinds == {"saturating"}:
            self._stack = ("saturating",
                           np.array([fn.lo for fn in self.freq_fns]),
                           np.array([fn.hi for fn in self.freq_fns]),
                           np.array([fn.u0 for fn in self.freq_fns]),
                           np.array([fn.s for fn in self.freq_fns]))

    # -- vectorized sigma ----------------------------------------------------

    def sigma(self, gamma):
        """sigma_i(gamma_i) columnwise; gamma has shape (..., n)."""
        gamma = np.asarray(gamma, dtype=float)
        u = self.zeta.value(gamma)
        if self._stack is not None:
            if self._stack[0] == "affine":
                _, omega, k = self._stack
                return omega + k * u
            _, lo, hi, u0, s = self._stack
            return lo + (hi - lo) * _expit(s * (u - u0))
        out = np.empty_like(u)
        for i, fn in enumerate(self.freq_fns):
            out[..., i] = fn.value(u[..., i])
        return out

    def sigma_slope(self, gamma):
        """d sigma_i / d gamma_i columnwise (always positive)."""
        gamma = np.asarray(gamma, dtype=float)
        u = self.zeta.value(gamma)
        du = self.zeta.slope(gamma)
        if self._stack is not None:
            if self._stack[0] == "affine":
                _, _, k = self._stack
                return k * du
            _, lo, hi, u0, s = self._stack
            g = _expit(s * (u - u0))
            return (hi - lo) * s * g * (1.0 - g) * du
        out = np.empty_like(u)
        for i, fn in enumerate(self.freq_fns):
            out[..., i] = fn.slope(u[..., i])
        return out * du

    def sigma_inverse(self, values):
        """Columnwise sigma_i^{-1}; values must lie strictly inside the images."""
        values = np.asarray(values, dtype=float)
        u = np.empty_like(values)
        for i, fn in enumerate(self.freq_fns):
            lo, hi = fn.image()
            col = values[..., i]
            if (col <= lo).any() or (col >= hi).any():
                raise OutOfImage(
                    f"value outside open image ({lo}, {hi}) of oscillator {i + 1}")
            u[..., i] = fn.inverse(col)
        zlo, zhi = self.zeta.image
        if (u <= zlo).any() or (u >= zhi).any():
            raise OutOfImage("required control input outside the scaling image")
        return self.zeta.inverse(u)

    def sigma_image(self, i0: int) -> tuple[float, float]:
        """Open image (lo, hi) of sigma_i for internal index i0."""
        zlo, zhi = self.zeta.image
        return self.freq_fns[i0].image(zlo, zhi)

    def images(self):
        return [self.sigma_image(i) for i in range(self.n)]

    @property
    def J(self) -> tuple[float, float]:
        ims = self.images()
        return (max(lo for lo, _ in ims), min(hi for _, hi in ims))

    @property
    def varpi(self) -> float:
        """Reference frequency in J: the midpoint, or beta^{-1}(0) if J is unbounded."""
        if self._varpi is None:
            lo, hi = self.J
            if math.isfinite(lo) and math.isfinite(hi):
                self._varpi = 0.5 * (lo + hi)
            else:
                self._varpi = beta_inverse(self, 0.0)
        return self._varpi

    @property
    def gamma_ref(self) -> np.ndarray:
        """Filter state with all frequencies equal to varpi (the minimum of W)."""
        if self._g0 is None:
            g0 = self.sigma_inverse(np.full(self.n, self.varpi))
            g0.setflags(write=False)
            self._g0 = g0
        return self._g0

    # -- filter-state energy W -------------------------------------------------

    def w_energy(self, gamma):
        """W(gamma) = sum_i (1/c_i) int_{g0_i}^{gamma_i} (sigma_i(s) - varpi) ds.

        Nonnegative, zero exactly at gamma_ref.  Uses closed-form
        antiderivatives when the (chi, zeta) pair admits one, and panelled
        Gauss-Legendre quadrature (1e-10 absolute or better) otherwise.
        """
        gamma = np.asarray(gamma, dtype=float)
        varpi = self.varpi
        g0 = self.gamma_ref
        total = np.zeros(gamma.shape[:-1])
        for i, fn in enumerate(self.freq_fns):
            gi = gamma[..., i]
            anti = self._sigma_antiderivative(i)
            if anti is not None:
                G = anti(gi) - anti(g0[i]) - varpi * (gi - g0[i])
            else:
                G = _integral_many(lambda s, i=i: self._sigma_scalar_col(i, s) - varpi,
                                   float(g0[i]), gi, panel=self._quad_panel())
            total = total + G / self.c[i]
        return total

    def _sigma_scalar_col(self, i, s):
        return self.freq_fns[i].value(self.zeta.value(s))

    def _quad_panel(self) -> float:
        rate = getattr(self.zeta, "rate", 1.0)
        return 0.2 / max(1.0, rate)

    def _sigma_antiderivative(self, i):
        """Closed-form antiderivative of sigma_i, or None."""
        fn = self.freq_fns[i]
        z = self.zeta
        if isinstance(z, IdentityScale):
            if isinstance(fn, AffineFreq):
                return lambda s: fn.omega * s + 0.5 * fn.k * s ** 2
            if isinstance(fn, SaturatingFreq):
                return lambda s: fn.lo * s + (fn.hi - fn.lo) / fn.s * _softplus(
                    fn.s * (s - fn.u0))
        if isinstance(z, LogisticScale) and isinstance(fn, AffineFreq):
            def anti(s):
                zint = z.lo * s + (z.hi - z.lo) / z.rate * _softplus(
                    z.rate * (s - z.center))
                return fn.omega * s + fn.k * zint
            return anti
        return None

    def to_config(self):
        lo, hi = self.constraint
        return {
            "oscillators": [fn.to_config() for fn in self.freq_fns],
            "zeta": self.zeta.to_config(),
            "I": [None if not math.isfinite(lo) else lo,
                  None if not math.isfinite(hi) else hi],
            "c": list(self.c),
        }


# --- quadrature helpers ------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _integral_many(fun, a: float, xs, panel: float = 0.2):
    """int_a^x fun(s) ds for every x in xs, vectorized.

    Builds prefix integrals over uniform panels covering [min, max] of all
    query points, then adds a partial-panel Gauss-Legendre remainder per
    query.  fun must be smooth with features no finer than `panel`.
    """
    xs = np.asarray(xs, dtype=float)
    flat = xs.ravel()
    lo = min(flat.min(), a)
    hi = max(flat.max(), a)
    span = max(hi - lo, panel)
    n_panels = int(math.ceil(span / panel))
    edges = np.linspace(lo, hi if hi > lo else lo + panel, n_panels + 1)
    width = edges[1] - edges[0]
    # prefix[k] = integral from edges[0] to edges[k]
    mids = 0.5 * (edges[:-1] + edges[1:])
    nodes = mids[:, None] + 0.5 * width * _GL_NODES[None, :]
    vals = fun(nodes)
    per_panel = 0.5 * width * vals @ _GL_WEIGHTS
    prefix = np.concatenate([[0.0], np.cumsum(per_panel)])

    def F(points):
        points = np.asarray(points, dtype=float)
        idx = np.clip(np.searchsorted(edges, points, side="right") - 1, 0, n_panels - 1)
        left = edges[idx]
        half = 0.5 * (points - left)
        qnodes = left[..., None] + half[..., None] * (_GL_NODES[None, :] + 1.0)
        rem = half * (fun(qnodes) @ _GL_WEIGHTS)
        return prefix[idx] + rem

    return (F(flat) - F(np.array([a]))[0]).reshape(xs.shape)


def _adaptive_simpson(fun, a: float, b: float, tol: float = 1e-10) -> float:
    """Classic adaptive Simpson quadrature (scalar reference path)."""
    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, eps, depth):
        x1 = 0.5 * (x0 + x2)
        lm, rm = 0.5 * (x0 + x1), 0.5 * (x1 + x2)
        flm, frm = fun(lm), fun(rm)
        left = simpson(x0, x1, f0, flm, f1)
        right = simpson(x1, x2, f1, frm, f2)
        if depth > 50 or abs(left + right - whole) < 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (recurse(x0, x1, f0, flm, f1, left, eps / 2.0, depth + 1)
                + recurse(x1, x2, f1, frm, f2, right, eps / 2.0, depth + 1))

    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    f0, f1, f2 = fun(a), fun(0.5 * (a + b)), fun(b)
    whole = simpson(a, b, f0, f1, f2)
    return sign * recurse(a, b, f0, f1, f2, whole, tol, 0)


def w_energy_simpson(bank: OscBank, gamma) -> float:
    """Scalar W via adaptive Simpson; reference for w_energy's batch path."""
    gamma = np.asarray(gamma, dtype=float)
    varpi = bank.varpi
    g0 = bank.gamma_ref
    total = 0.0
    for i in range(bank.n):
        total += _adaptive_simpson(
            lambda s, i=i: float(bank._sigma_scalar_col(i, s)) - varpi,
            float(g0[i]), float(gamma[i])) / bank.c[i]
    return total


# --- public operations --------------------------------------------------------

def eval_sigma(bank: OscBank, i: int, gamma_i) -> float:
    """sigma_i(gamma_i) for 1-indexed vertex i."""
    _check_vertex(bank, i)
    return float(bank.freq_fns[i - 1].value(bank.zeta.value(gamma_i)))


def invert_sigma(bank: OscBank, i: int, s: float) -> float:
    """sigma_i^{-1}(s) for 1-indexed vertex i; s must be inside the open image."""
    _check_vertex(bank, i)
    lo, hi = bank.sigma_image(i - 1)
    if not (lo < s < hi):
        raise OutOfImage(f"s = {s} outside open image ({lo}, {hi}) of oscillator {i}")
    u = bank.freq_fns[i - 1].inverse(s)
    return float(bank.zeta.inverse(u))


def invert_sigma_bisect(bank: OscBank, i: int, s: float, tol: float = 1e-14) -> float:
    """Generic monotone-bisection inverse with expanding bracket.

    Kept as the kind-agnostic path; the closed-form invert_sigma is checked
    against it in the test suite.
    """
    _check_vertex(bank, i)
    lo, hi = bank.sigma_image(i - 1)
    if not (lo < s < hi):
        raise OutOfImage(f"s = {s} outside open image ({lo}, {hi}) of oscillator {i}")
    f = lambda g: eval_sigma(bank, i, g) - s
    a, b = 0.0, 1.0
    step = 1.0
    for _ in range(200):
        if f(a) <= 0.0:
            break
        a -= step
        step *= 2.0
    else:
        raise MalformedBank("bracket expansion failed (lower side)")
    step = 1.0
    for _ in range(200):
        if f(b) >= 0.0:
            break
        b += step
        step *= 2.0
    else:
        raise MalformedBank("bracket expansion failed (upper side)")
    for _ in range(200):
        mid = 0.5 * (a + b)
        if b - a < tol * max(1.0, abs(mid)):
            break
        if f(mid) < 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def beta(bank: OscBank, s: float) -> float:
    """beta(s) = sum_i q_i sigma_i^{-1}(s), for s strictly inside J."""
    lo, hi = bank.J
    if not (lo < s < hi):
        raise OutOfJ(f"s = {s} outside J = ({lo}, {hi})")
    g = bank.sigma_inverse(np.full(bank.n, float(s)))
    return float(bank.q @ g)


def beta_inverse(bank: OscBank, r: float) -> float:
    """The unique s in J with beta(s) = r (monotone bisection over J)."""
    lo, hi = bank.J
    if not lo < hi:
        raise OutOfJ(f"J = ({lo}, {hi}) is empty")
    if math.isfinite(lo) and math.isfinite(hi):
        s0 = 0.5 * (lo + hi)
    else:
        mids = [0.5 * sum(im) if all(map(math.isfinite, im)) else 0.0
                for im in bank.images()]
        s0 = float(np.clip(np.median(mids), lo + 1.0 if math.isfinite(lo) else -1e9,
                           hi - 1.0 if math.isfinite(hi) else 1e9))

    def bval(s):
        return float(bank.q @ bank.sigma_inverse(np.full(bank.n, s)))

    # expand a bracket [a, b] with beta(a) <= r <= beta(b)
    a = b = s0
    gap = max(1.0, abs(s0)) * 0.5
    for _ in range(200):
        if bval(a) <= r:
            break
        a = a - gap if not math.isfinite(lo) else lo + (a - lo) * 0.25
        gap *= 2.0
    else:
        raise MalformedBank("beta bracket expansion failed (lower side)")
    gap = max(1.0, abs(s0)) * 0.5
    for _ in range(200):
        if bval(b) >= r:
            break
        b = b + gap if not math.isfinite(hi) else hi - (hi - b) * 0.25
        gap *= 2.0
    else:
        raise MalformedBank("beta bracket expansion failed (upper side)")
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        if bval(mid) < r:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def alpha(bank: OscBank, r: float) -> np.ndarray:
    """Filter vector with every frequency equal to beta^{-1}(r); q^T alpha(r) = r."""
    s = beta_inverse(bank, r)
    return bank.sigma_inverse(np.full(bank.n, s))


def validate_bank(bank: OscBank, for_dual: bool = False) -> ValidationReport:
    """Check image overlap, constraint containment, monotonicity and A7."""
    rep = ValidationReport(subject=f"bank of {bank.n} oscillators")
    lo, hi = bank.J
    rep.add("common_frequency_band_nonempty", lo < hi, f"J = ({lo:.6g}, {hi:.6g})")
    ims = bank.images()
    clo, chi = bank.constraint
    union_lo = min(a for a, _ in ims)
    union_hi = max(b for _, b in ims)
    rep.add("images_within_constraint",
            union_lo >= clo and union_hi <= chi,
            f"union of images = ({union_lo:.6g}, {union_hi:.6g}), "
            f"constraint = ({clo:.6g}, {chi:.6g})")
    grid = np.linspace(-20.0, 20.0, 257)
    zeta_slopes = bank.zeta.slope(grid)
    rep.add("scaling_strictly_increasing", bool((zeta_slopes > 0).all()),
            f"min zeta' = {float(np.min(zeta_slopes)):.3g}")
    u_grid = bank.zeta.value(grid)
    chi_min = min(float(np.min(fn.slope(u_grid))) for fn in bank.freq_fns)
    rep.add("frequency_fns_strictly_increasing", chi_min > 0,
            f"min chi' on sampled grid = {chi_min:.3g}")
    if for_dual:
        zlo, zhi = bank.zeta.image
        chi_pos = all(fn.image(zlo, zhi)[0] >= 0 for fn in bank.freq_fns)
        rep.add("a7_positive_frequencies", zlo >= 0 and chi_pos,
                f"control range = ({zlo:.6g}, {zhi:.6g})")
    return rep


def require_a7(bank: OscBank) -> None:
    rep = validate_bank(bank, for_dual=True)
    bad = [c for c in rep.failures() if c.name == "a7_positive_frequencies"]
    if bad:
        raise AssumptionA7Violated(bad[0].detail)


def _check_vertex(bank: OscBank, i: int) -> None:
    if not (1 <= i <= bank.n):
        raise InvalidRange(f"vertex index {i} outside 1..{bank.n}")


# --- configuration ------------------------------------------------------------

def _freq_from_config(cfg: dict):
    kind = cfg.get("kind")
    if kind == "affine":
        return AffineFreq(omega=float(cfg["omega"]), k=float(cfg.get("k", 1.0)))
    if kind == "saturating":
        return SaturatingFreq(lo=float(cfg["lo"]), hi=float(cfg["hi"]),
                              u0=float(cfg.get("u0", 0.0)), s=float(cfg.get("s", 1.0)))
    raise InvalidRange(f"unknown frequency function kind {kind!r}")


def _zeta_from_config(cfg: dict):
    kind = cfg.get("kind", "identity")
    if kind == "identity":
        return IdentityScale()
    if kind == "logistic":
        return LogisticScale(lo=float(cfg["lo"]), hi=float(cfg["hi"]),
                             center=float(cfg.get("center", 0.0)),
                             rate=float(cfg.get("rate", 1.0)))
    raise InvalidRange(f"unknown scaling kind {kind!r}")


def bank_from_config(cfg: dict | str) -> OscBank:
    if isinstance(cfg, str):
        cfg = json.loads(cfg)
    fns = [_freq_from_config(o) for o in cfg["oscillators"]]
    zeta = _zeta_from_config(cfg.get("zeta", {"kind": "identity"}))
    I = cfg.get("I", [None, None])
    lo = -_INF if I[0] is None else float(I[0])
    hi = _INF if I[1] is None else float(I[1])
    c = cfg.get("c")
    return OscBank(fns, zeta, constraint=(lo, hi), c=c)
