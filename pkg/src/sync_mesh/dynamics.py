"""Vector fields and trajectories for the three closed-loop systems.

Systems
    PI        phi' = Sigma(kappa*e(phi) + gamma),  gamma' = C e(phi)
    DUAL      phi' = Sigma(gamma),  gamma' = C e(phi) - C B H(gamma) B^T Sigma(gamma)
    KURAMOTO  phi'_i = chi_i(e_i),  gamma' = 0   (unity loop filter baseline)

Phases are integrated on the universal cover (plain reals); the fields
depend on phases only through wrapped differences, so the lift is exact.
All evaluations broadcast over leading axes: a state block of shape
(trials, n) advances a whole batch of independent trials at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .coupling import CouplingFn, wrap_angle
from .errors import InvalidRange, NonFiniteState, NonPositiveWeight
from .topo import Graph, ProjectionSet, projection_set
from .vco import AffineFreq, OscBank, beta_inverse, require_a7

__all__ = [
    "OscNetwork",
    "NetState",
    "SystemKind",
    "Trajectory",
    "SyncReport",
    "phase_error",
    "z_error",
    "z_error_ratio_form",
    "coupling_energy",
    "vector_field",
    "integrate",
    "phase_diameter",
    "sync_report",
    "write_csv",
]


class SystemKind(str, Enum):
    PI = "pi"
    DUAL = "dual"
    KURAMOTO = "kuramoto"


class OscNetwork:
    """Graph + oscillator bank + coupling: the full system description.

    d      optional positive edge weights for the dual frequency comparator
           (defaults to 1 on every edge)
    kappa  optional positive per-vertex proportional gains (default 1);
           only the PI loop uses them
    """

    def __init__(self, graph: Graph, bank: OscBank, coupling: CouplingFn,
                 d=None, kappa=None):
        if bank.n != graph.n:
            raise InvalidRange(
                f"bank has {bank.n} oscillators but graph has {graph.n} vertices")
        self.graph = graph
        self.bank = bank
        self.coupling = coupling
        d = np.ones(graph.m) if d is None else np.array(d, dtype=float)
        if d.shape != (graph.m,) or (d <= 0).any():
            raise NonPositiveWeight(f"need {graph.m} positive dual edge weights")
        kappa = np.ones(graph.n) if kappa is None else np.array(kappa, dtype=float)
        if kappa.shape != (graph.n,) or (kappa <= 0).any():
            raise InvalidRange(f"need {graph.n} positive proportional gains")
        d.setflags(write=False)
        kappa.setflags(write=False)
        self.d = d
        self.kappa = kappa
        self.proj: ProjectionSet = projection_set(graph, bank.c)
        self.tails = np.array([t - 1 for t, _ in graph.edges])
        self._a7_checked = False

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m


@dataclass(frozen=True)
class NetState:
    """Phases (circle-valued semantics) and filter states."""

    phi: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))
        if self.phi.shape != self.gamma.shape:
            raise InvalidRange(
                f"phi shape {self.phi.shape} != gamma shape {self.gamma.shape}")


def phase_error(net: OscNetwork, phi) -> np.ndarray:
    """e(phi) = -B A F(B^T phi); broadcasts over leading axes of phi."""
    phi = np.asarray(phi, dtype=float)
    theta = phi @ net.proj.B
    fw = net.graph.weights * net.coupling.value(theta)
    return -(fw @ net.proj.B.T)


def _eta(net: OscNetwork, gamma, sig=None) -> np.ndarray:
    """Per-edge gains eta_k = d_k zeta(gamma_j) / chi_j(zeta(gamma_j)), j = tail of k."""
    gamma = np.asarray(gamma, dtype=float)
    if sig is None:
        sig = net.bank.sigma(gamma)
    zvals = net.bank.zeta.value(gamma)
    return net.d * zvals[..., net.tails] / sig[..., net.tails]


def z_error(net: OscNetwork, gamma) -> np.ndarray:
    """Frequency-mismatch error z = -B H(gamma) B^T Sigma(gamma).

    Needs the per-edge ratios to be well defined at the evaluated state:
    every zeta(gamma_i) and every frequency must be positive there.  (The
    dual integrator additionally requires this globally, i.e. bank-level
    positivity.)
    """
    gamma = np.asarray(gamma, dtype=float)
    _check_positive_point(net, gamma)
    sig = net.bank.sigma(gamma)
    eta = _eta(net, gamma, sig)
    return -((eta * (sig @ net.proj.B)) @ net.proj.B.T)


def _check_positive_point(net: OscNetwork, gamma) -> None:
    from .errors import AssumptionA7Violated

    zv = net.bank.zeta.value(gamma)
    sig = net.bank.sigma(gamma)
    if (zv <= 0).any() or (sig <= 0).any():
        raise AssumptionA7Violated(
            "zeta(gamma) and all frequencies must be positive to form the "
            "frequency-mismatch ratios at this state")


def z_error_ratio_form(net: OscNetwork, gamma) -> np.ndarray:
    """The same error computed literally from the transmitted-ratio form.

    Each vertex combines the scaled states zeta(gamma_j) of its neighbors
    with the ratio rho_ij = zeta(gamma_j) chi_i(.) / (zeta(gamma_i) chi_j(.)),
    splitting the sum by edge orientation.  Used to cross-check z_error.
    """
    _require_a7(net)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 1:
        raise InvalidRange("ratio form is the scalar reference path; pass one state")
    zeta = net.bank.zeta
    zv = zeta.value(gamma)
    chi = np.array([fn.value(zv[i]) for i, fn in enumerate(net.bank.freq_fns)])
    z = np.zeros(net.n)
    for k, (t, h) in enumerate(net.graph.edges):
        i, j = t - 1, h - 1  # i is the tail, j the head of edge k
        dk = net.d[k]
        rho_ji = zv[i] * chi[j] / (zv[j] * chi[i])   # rho for head looking at tail
        rho_ij = zv[j] * chi[i] / (zv[i] * chi[j])   # rho for tail looking at head
        # head vertex j: edge arrives, (i, k) in its N^+ set
        z[j] += dk * (zv[i] - rho_ji * zv[j])
        # tail vertex i: edge leaves, (j, k) in its N^- set
        z[i] += dk * (zv[j] / rho_ij - zv[i])
    return z


def _require_a7(net: OscNetwork) -> None:
    if not net._a7_checked:
        require_a7(net.bank)
        net._a7_checked = True


def _kuramoto_params(net: OscNetwork):
    if net.coupling.kind != "sine":
        raise InvalidRange("the Kuramoto baseline requires sine coupling")
    if not all(isinstance(fn, AffineFreq) for fn in net.bank.freq_fns):
        raise InvalidRange("the Kuramoto baseline requires affine frequency functions")
    omega = np.array([fn.omega for fn in net.bank.freq_fns])
    k = np.array([fn.k for fn in net.bank.freq_fns])
    return omega, k


def _make_field(net: OscNetwork, kind: SystemKind):
    """Bind a (phi, gamma) -> (dphi, dgamma) closure with checks done once."""
    kind = SystemKind(kind)
    bank = net.bank
    c = bank.c
    kappa = net.kappa
    if kind is SystemKind.PI:
        def field(phi, gamma):
            e = phase_error(net, phi)
            return bank.sigma(kappa * e + gamma), c * e
        return field
    if kind is SystemKind.DUAL:
        _require_a7(net)
        B, Bt, d, tails = net.proj.B, net.proj.B.T, net.d, net.tails
        zeta = bank.zeta

        def field(phi, gamma):
            e = phase_error(net, phi)
            sig = bank.sigma(gamma)
            eta = d * zeta.value(gamma)[..., tails] / sig[..., tails]
            z = -((eta * (sig @ B)) @ Bt)
            return sig, c * (e + z)
        return field
    omega, kvec = _kuramoto_params(net)

    def field(phi, gamma):
        e = phase_error(net, phi)
        return omega + kvec * e, np.zeros_like(gamma)
    return field


def vector_field(net: OscNetwork, kind: SystemKind, state: NetState) -> NetState:
    """Time derivative of the state under the chosen closed loop."""
    dphi, dgamma = _make_field(net, kind)(state.phi, state.gamma)
    return NetState(phi=dphi, gamma=dgamma)


def phase_diameter(phi) -> np.ndarray:
    """Largest pairwise geodesic distance on the circle, in [0, pi].

    Brute force over all pairs; broadcasts over leading axes.
    """
    phi = np.asarray(phi, dtype=float)
    diff = wrap_angle(phi[..., :, None] - phi[..., None, :])
    return np.abs(diff).max(axis=(-2, -1))


def coupling_energy(net: OscNetwork, phi) -> np.ndarray:
    """V(B^T phi) = sum_k a_k Psi(theta_k), the edge-potential part of U."""
    phi = np.asarray(phi, dtype=float)
    theta = phi @ net.proj.B
    return (net.graph.weights * net.coupling.potential(theta)).sum(axis=-1)


class Trajectory:
    """Recorded states plus derived channels on a uniform time grid.

    Arrays are (n_rec, n) for a single run or (n_rec, trials, n) for a
    batch; scalar channels drop the trailing axis.  converged_at holds the
    record index where sustained convergence was declared (-1 if never).
    """

    def __init__(self, t, phi, gamma, freqs, dphi, energy, q_gamma,
                 converged_at, dt, kind):
        self.t = t
        self.phi = phi
        self.gamma = gamma
        self.freqs = freqs
        self.dphi = dphi
        self.energy = energy
        self.q_gamma = q_gamma
        self.converged_at = converged_at
        self.dt = dt
        self.kind = SystemKind(kind)

    @property
    def is_batch(self) -> bool:
        return self.phi.ndim == 3

    @property
    def n_trials(self) -> int:
        return self.phi.shape[1] if self.is_batch else 1

    @property
    def n_samples(self) -> int:
        return len(self.t)

    def trial(self, j: int) -> "Trajectory":
        if not self.is_batch:
            raise InvalidRange("trajectory is not batched")
        return Trajectory(self.t, self.phi[:, j], self.gamma[:, j],
                          self.freqs[:, j], self.dphi[:, j], self.energy[:, j],
                          self.q_gamma[:, j], int(self.converged_at[j]),
                          self.dt, self.kind)

    def truncated(self) -> "Trajectory":
        """Drop samples after this run's own convergence record, if any."""
        if self.is_batch:
            raise InvalidRange("truncate per trial, not per batch")
        if self.converged_at is None or self.converged_at < 0:
            return self
        stop = int(self.converged_at) + 1
        return Trajectory(self.t[:stop], self.phi[:stop], self.gamma[:stop],
                          self.freqs[:stop], self.dphi[:stop], self.energy[:stop],
                          self.q_gamma[:stop], self.converged_at, self.dt, self.kind)

    def final_state(self) -> NetState:
        return NetState(phi=self.phi[-1], gamma=self.gamma[-1])


def integrate(net: OscNetwork, kind: SystemKind, state0: NetState,
              dt: float, T: float, record_every: int = 1,
              detect_convergence: bool = True,
              conv_dphi: float = 1e-10, conv_err: float = 1e-12,
              conv_samples: int = 100) -> Trajectory:
    """Classical fixed-step RK4 flow of the chosen system.

    Records every `record_every` steps (plus the final step).  When
    detect_convergence is set, a trial counts as converged once
    phase_diameter < conv_dphi and ||e||_inf < conv_err hold at
    conv_samples consecutive recorded samples; integration stops early
    when every trial has converged, and the record index is reported in
    Trajectory.converged_at.
    """
    if not dt > 0:
        raise InvalidRange(f"dt must be > 0, got {dt}")
    if T < dt:
        raise InvalidRange(f"T = {T} shorter than one step dt = {dt}")
    if record_every < 1:
        raise InvalidRange("record_every must be >= 1")
    field = _make_field(net, kind)
    phi = np.atleast_2d(np.asarray(state0.phi, dtype=float)).copy()
    gamma = np.atleast_2d(np.asarray(state0.gamma, dtype=float)).copy()
    batch_in = np.asarray(state0.phi).ndim == 2
    trials = phi.shape[0]
    n_steps = int(round(T / dt))

    rec_t, rec_phi, rec_gamma = [], [], []
    streak = np.zeros(trials, dtype=int)
    converged_at = np.full(trials, -1, dtype=int)

    def record(step: int) -> bool:
        """Append a sample; returns True when all trials are converged."""
        if not (np.isfinite(phi).all() and np.isfinite(gamma).all()):
            raise NonFiniteState(f"non-finite state at t = {step * dt}")
        rec_t.append(step * dt)
        rec_phi.append(phi.copy())
        rec_gamma.append(gamma.copy())
        if not detect_convergence:
            return False
        e = phase_error(net, phi)
        ok = ((phase_diameter(phi) < conv_dphi)
              & (np.abs(e).max(axis=-1) < conv_err))
        streak[:] = np.where(ok, streak + 1, 0)
        idx = len(rec_t) - 1
        newly = (streak >= conv_samples) & (converged_at < 0)
        converged_at[newly] = idx
        return bool((converged_at >= 0).all())

    done = record(0)
    for step in range(1, n_steps + 1):
        if done:
            break
        k1p, k1g = field(phi, gamma)
        k2p, k2g = field(phi + 0.5 * dt * k1p, gamma + 0.5 * dt * k1g)
        k3p, k3g = field(phi + 0.5 * dt * k2p, gamma + 0.5 * dt * k2g)
        k4p, k4g = field(phi + dt * k3p, gamma + dt * k3g)
        phi += (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        gamma += (dt / 6.0) * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
        if step % record_every == 0 or step == n_steps:
            done = record(step)

    t = np.array(rec_t)
    phi_rec = np.stack(rec_phi)      # (n_rec, trials, n)
    gamma_rec = np.stack(rec_gamma)

    freqs, _ = field(phi_rec, gamma_rec)
    dphi = phase_diameter(phi_rec)
    energy = coupling_energy(net, phi_rec) + net.bank.w_energy(gamma_rec)
    q_gamma = gamma_rec @ net.bank.q

    if not batch_in:
        phi_rec, gamma_rec = phi_rec[:, 0], gamma_rec[:, 0]
        freqs, dphi = freqs[:, 0], dphi[:, 0]
        energy, q_gamma = energy[:, 0], q_gamma[:, 0]
        conv = int(converged_at[0])
    else:
        conv = converged_at
    return Trajectory(t, phi_rec, gamma_rec, freqs, dphi, energy, q_gamma,
                      conv, dt, kind)


@dataclass(frozen=True)
class SyncReport:
    """Measured synchronization summary for one trajectory."""

    predicted_freq: float
    final_dphi: float
    final_freq_spread: float
    constraint_violations: int
    max_gamma_norm: float
    q_gamma_drift: float
    converged_early: bool
    converged_time: float | None
    duration: float

    def to_dict(self) -> dict:
        return {
            "predicted_freq": self.predicted_freq,
            "final_dphi": self.final_dphi,
            "final_freq_spread": self.final_freq_spread,
            "constraint_violations": self.constraint_violations,
            "max_gamma_norm": self.max_gamma_norm,
            "q_gamma_drift": self.q_gamma_drift,
            "converged_early": self.converged_early,
            "converged_time": self.converged_time,
            "duration": self.duration,
        }


def sync_report(traj: Trajectory, bank: OscBank) -> SyncReport:
    """Summarize a single-trial trajectory against the almost-global
    synchronization goal: phase agreement, frequency agreement with the
    leaf-predicted value, constrained frequencies, bounded filter states."""
    if traj.is_batch:
        raise InvalidRange("pass traj.trial(j) for batched trajectories")
    omega_hat = beta_inverse(bank, float(traj.q_gamma[0]))
    lo, hi = bank.constraint
    violations = int(((traj.freqs < lo) | (traj.freqs > hi)).any(axis=-1).sum())
    conv = traj.converged_at if traj.converged_at is not None else -1
    return SyncReport(
        predicted_freq=float(omega_hat),
        final_dphi=float(traj.dphi[-1]),
        final_freq_spread=float(np.abs(traj.freqs[-1] - omega_hat).max()),
        constraint_violations=violations,
        max_gamma_norm=float(np.abs(traj.gamma).max()),
        q_gamma_drift=float(np.abs(traj.q_gamma - traj.q_gamma[0]).max()),
        converged_early=bool(conv >= 0),
        converged_time=float(traj.t[conv]) if conv >= 0 else None,
        duration=float(traj.t[-1]),
    )


def write_csv(traj: Trajectory, path) -> None:
    """Trajectory CSV: t,phi_1..phi_n,gamma_1..gamma_n,dphi,freq_1..freq_n,U,qTgamma."""
    if traj.is_batch:
        raise InvalidRange("write per-trial trajectories, not batches")
    n = traj.phi.shape[-1]
    cols = (["t"] + [f"phi_{i}" for i in range(1, n + 1)]
            + [f"gamma_{i}" for i in range(1, n + 1)] + ["dphi"]
            + [f"freq_{i}" for i in range(1, n + 1)] + ["U", "qTgamma"])
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(traj.n_samples):
            row = ([traj.t[k]] + list(traj.phi[k]) + list(traj.gamma[k])
                   + [traj.dphi[k]] + list(traj.freqs[k])
                   + [traj.energy[k], traj.q_gamma[k]])
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
