"""Measurement-record simulation and classical Fisher information.

Photon-counting records are sampled from the exact jump-process law: between
jumps the conditional state evolves under the non-Hermitian no-jump generator
and waiting times come from inverting the survival probability against a
uniform variate (no first-order dt bias).  Homodyne records are necessarily
dt-stepped (Euler-Maruyama of the diffusive unraveling).

The classical Fisher information rate of a detection scheme is estimated by
Monte Carlo: per trajectory, the score is a common-record central difference
of the log-likelihood, and the rate is mean(score^2) / T.  The module also
hosts two deterministic oracles: the brute-force tensor-product overlap
(explicit sum over all effect-operator strings) and the waiting-time
distribution information rate for the two-level atom, whose counting record
is a renewal process because every click resets the atom to the ground state.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from . import _kernels, liouvillian
from .errors import (
    InvalidParameter,
    GridTooCoarse,
    MultiChannelUnsupported,
    NoJumpOperators,
    StepTooLarge,
    TooManySteps,
)
from .model import ParameterVector, effect_operators, two_level
from .qfi import FisherEstimate

DEFAULT_BURN_IN_RELAXATION_TIMES = 20.0
HOMODYNE_STEP_FACTOR = 1e-3


@dataclass(frozen=True)
class CountingRecord:
    """One photon-counting record: ordered jump times and channels."""

    T: float
    jump_times: np.ndarray
    channels: np.ndarray
    theta_sim: ParameterVector
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "jump_times",
                           np.asarray(self.jump_times, dtype=float))
        object.__setattr__(self, "channels",
                           np.asarray(self.channels, dtype=np.int64))
        if np.any(np.diff(self.jump_times) <= 0):
            raise ValueError("jump times must be strictly increasing")
        if len(self.jump_times) and self.jump_times[-1] > self.T:
            raise ValueError("jump times must lie in (0, T]")


@dataclass(frozen=True)
class HomodyneRecord:
    """One homodyne record: integrated quadrature increments, one per step."""

    T: float
    dt: float
    phi: float
    increments: np.ndarray
    theta_sim: ParameterVector
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "increments",
                           np.asarray(self.increments, dtype=float))
        if len(self.increments) != round(self.T / self.dt):
            raise ValueError("increment count must equal round(T / dt)")


# --- exact no-jump propagation helpers ------------------------------------

class _HeffCache:
    """Eigendecomposition of H_eff(theta) reused across trajectories."""

    def __init__(self, m, theta):
        heff = m.h_eff(theta)
        self.evals, self.vectors = np.linalg.eig(heff)
        self.inv = np.linalg.inv(self.vectors)
        self.gram = self.vectors.conj().T @ self.vectors
        self.jumps = m.jump_ops(theta)
        # spectral form of S(t) = Tr E(t) rho E(t)^dag, flattened over (j, k)
        self.mu = (-1j * (self.evals[:, None] - self.evals.conj()[None, :])
                   ).reshape(-1)

    def propagator(self, tau):
        return (self.vectors * np.exp(-1j * self.evals * tau)) @ self.inv

    def survival_coeffs(self, rho):
        mat = self.inv @ rho @ self.inv.conj().T
        return (mat * self.gram.T).reshape(-1)


def _jump_probabilities(jumps, rho):
    probs = np.array([np.trace(op @ rho @ op.conj().T).real for op in jumps])
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if total <= 0:
        return None
    return probs / total


def _record_seed(master_seed, index):
    return int(np.random.SeedSequence((master_seed, index)).generate_state(1)[0])


def simulate_counting(m, theta, rho0, T, seed):
    """Sample one photon-counting record of duration T.

    Waiting times are drawn by inverting the exact survival probability of
    the conditional state under the no-jump generator; the jump channel is
    drawn proportionally to Tr(L_c rho~ L_c^dag) and the state is reset to
    the normalized post-jump state.
    """
    if not m.jumps:
        raise NoJumpOperators("counting requires at least one jump operator")
    cache = _HeffCache(m, theta)
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    rho = rho / np.trace(rho).real
    rng = np.random.default_rng(seed)

    t = 0.0
    times, channels = [], []
    while True:
        coeffs = cache.survival_coeffs(rho)
        u = rng.random()
        tau = _kernels.invert_survival(coeffs, cache.mu, u, T - t)
        if tau < 0:
            break
        prop = cache.propagator(tau)
        rho_tilde = prop @ rho @ prop.conj().T
        probs = _jump_probabilities(cache.jumps, rho_tilde)
        if probs is None:  # survival numerically flat at the jump point
            break
        channel = int(rng.choice(len(probs), p=probs))
        op = cache.jumps[channel]
        rho = op @ rho_tilde @ op.conj().T
        rho = rho / np.trace(rho).real
        t += tau
        times.append(t)
        channels.append(channel)
    return CountingRecord(T, np.array(times), np.array(channels, dtype=np.int64),
                          _as_pv(m, theta), seed)


def _as_pv(m, theta):
    if isinstance(theta, ParameterVector):
        return theta
    if theta is None:
        return m.params
    return m.params.with_values(theta)


def _counting_window_loglik(record, cache, rho0, t_start=0.0):
    """log Tr rho~(T) - log Tr rho~(t_start) with exact segment propagation.

    The density is taken with respect to the Lebesgue measure on jump
    times; constants independent of the parameters are dropped, which is
    harmless since only parameter differences of the result are used.
    """
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    rho = rho / np.trace(rho).real

    breakpoints = [(t, c) for t, c in zip(record.jump_times, record.channels)]
    if 0.0 < t_start <= record.T:
        breakpoints.append((t_start, -1))
    breakpoints.sort(key=lambda tc: (tc[0], tc[1]))
    breakpoints.append((record.T, -2))

    ll = 0.0
    ll_start = 0.0 if t_start <= 0.0 else None
    t_prev = 0.0
    for t, channel in breakpoints:
        tau = t - t_prev
        if tau > 0:
            prop = cache.propagator(tau)
            rho = prop @ rho @ prop.conj().T
            s = np.trace(rho).real
            ll += np.log(s)
            rho = rho / s
        if channel == -1:
            ll_start = ll
        elif channel >= 0:
            op = cache.jumps[channel]
            rho = op @ rho @ op.conj().T
            s = np.trace(rho).real
            ll += np.log(s)
            rho = rho / s
        t_prev = t
    if ll_start is None:  # t_start past the record end
        ll_start = ll
    return ll - ll_start


def log_likelihood_counting(record, m, theta):
    """Log probability density of a counting record under parameters theta."""
    cache = _HeffCache(m, _as_pv(m, theta))
    rho0 = liouvillian.resolve_initial_state(m, record.theta_sim)
    return _counting_window_loglik(record, cache, rho0)


# --- homodyne -------------------------------------------------------------

def homodyne_step_bound(m, theta):
    """Largest admissible Euler-Maruyama step for the diffusive unraveling."""
    h = m.h(theta)
    ops = m.jump_ops(theta)
    if len(ops) != 1:
        raise MultiChannelUnsupported(
            f"homodyne monitoring implemented for one channel, model has {len(ops)}"
        )
    op = ops[0]
    scale = max(np.linalg.norm(h, 2), np.linalg.norm(op.conj().T @ op, 2))
    if scale == 0.0:
        return np.inf
    return HOMODYNE_STEP_FACTOR / scale


def _homodyne_matrices(m, theta, dt, phi):
    ops = m.jump_ops(theta)
    if len(ops) != 1:
        raise MultiChannelUnsupported(
            f"homodyne monitoring implemented for one channel, model has {len(ops)}"
        )
    op = ops[0]
    h = m.h(theta)
    k0 = (np.eye(m.dimension, dtype=complex)
          - (1j * h + 0.5 * op.conj().T @ op) * dt)
    lphi = np.exp(-1j * phi) * op
    x = lphi + lphi.conj().T
    return k0, lphi, x


def simulate_homodyne(m, theta, rho0, T, dt, phi, seed):
    """Sample one homodyne record: dy = Tr(x rho) dt + dW, dW ~ N(0, dt)."""
    bound = homodyne_step_bound(m, theta)
    if dt > bound:
        raise StepTooLarge(f"homodyne step {dt:.3g} exceeds bound {bound:.3g}")
    k0, lphi, x = _homodyne_matrices(m, theta, dt, phi)
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    rho = rho / np.trace(rho).real
    n_steps = round(T / dt)
    noise = np.random.default_rng(seed).standard_normal(n_steps)
    dys = _kernels.homodyne_simulate(k0, lphi, x, rho, float(dt), noise)
    return HomodyneRecord(n_steps * dt, dt, phi, dys, _as_pv(m, theta), seed)


def log_likelihood_homodyne(record, m, theta):
    """Log-likelihood of a homodyne record (Wiener reference measure dropped)."""
    k0, lphi, _ = _homodyne_matrices(m, _as_pv(m, theta), record.dt, record.phi)
    rho0 = liouvillian.resolve_initial_state(m, record.theta_sim)
    return float(_kernels.homodyne_loglik(k0, lphi, rho0, float(record.dt),
                                          record.increments, 0))


# --- classical Fisher information by Monte Carlo --------------------------

def cfi_rate(m, theta, alpha, scheme, T, n_traj, burn_in=None, seed=0,
             h=None, phi=0.0, dt=None, threads=1):
    """Monte-Carlo classical Fisher information rate for a detection scheme.

    Records start from the steady state; an additional burn-in window
    (default 20 relaxation times) is simulated and excluded from the
    likelihood difference, removing the O(1) initialization bias of the
    rate.  Per trajectory the score is
    [loglik(theta + h e_alpha) - loglik(theta - h e_alpha)] / (2h)
    evaluated on the same record, and the estimate is mean(score^2) / T
    with the standard error taken over trajectories.
    """
    if scheme not in ("counting", "homodyne"):
        raise ValueError(f"unknown scheme {scheme!r}")
    theta = _as_pv(m, theta)
    gap = liouvillian.spectral_gap(m, theta)
    if burn_in is None:
        burn_in = DEFAULT_BURN_IN_RELAXATION_TIMES / gap
    if h is None:
        h = max(1e-4 * abs(theta.values[alpha]), 1e-5)
    rho_s = liouvillian.steady_state(m, theta)
    theta_p = theta.perturbed(alpha, +h)
    theta_m = theta.perturbed(alpha, -h)
    t_total = burn_in + T
    flags = []
    if T * gap < 100.0:
        flags.append("short_record")

    if scheme == "counting":
        cache_p = _HeffCache(m, theta_p)
        cache_m = _HeffCache(m, theta_m)

        def one(k):
            record = simulate_counting(m, theta, rho_s, t_total,
                                       _record_seed(seed, k))
            llp = _counting_window_loglik(record, cache_p, rho_s, burn_in)
            llm = _counting_window_loglik(record, cache_m, rho_s, burn_in)
            return (llp - llm) / (2.0 * h)

        meta_scheme = {}
    else:
        bound = homodyne_step_bound(m, theta)
        if dt is None:
            dt = bound if np.isfinite(bound) else 1e-3
        elif dt > bound:
            raise StepTooLarge(f"homodyne step {dt:.3g} exceeds bound {bound:.3g}")
        k0_s, lphi_s, x = _homodyne_matrices(m, theta, dt, phi)
        k0_p, lphi_p, _ = _homodyne_matrices(m, theta_p, dt, phi)
        k0_m, lphi_m, _ = _homodyne_matrices(m, theta_m, dt, phi)
        n_steps = round(t_total / dt)
        i_start = round(burn_in / dt)

        def one(k):
            noise = np.random.default_rng(
                _record_seed(seed, k)).standard_normal(n_steps)
            llp, llm = _kernels.homodyne_scores(
                k0_s, lphi_s, x, k0_p, lphi_p, k0_m, lphi_m,
                rho_s, float(dt), noise, i_start)
            return (llp - llm) / (2.0 * h)

        meta_scheme = {"phi": phi, "dt": dt}

    scores = np.empty(n_traj)
    if threads <= 1:
        for k in range(n_traj):
            scores[k] = one(k)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for k, s in zip(range(n_traj), pool.map(one, range(n_traj))):
                scores[k] = s

    sq = scores ** 2
    value = float(sq.mean() / T)
    std_error = float(sq.std(ddof=1) / np.sqrt(n_traj) / T)
    meta = {"n_traj": n_traj, "T": T, "burn_in": burn_in, "h": h,
            "seed": seed, "flags": flags, **meta_scheme}
    return FisherEstimate(value, (alpha, alpha),
                          "counting_mc" if scheme == "counting" else "homodyne_mc",
                          std_error, meta)


# --- waiting-time-distribution oracle (two-level renewal process) ---------

def _wtd_curves(theta, taus):
    """Waiting-time density w(tau) = kappa |<e| exp(-i H_eff tau) |g>|^2."""
    m = two_level(*theta)
    evals, vectors = np.linalg.eig(m.h_eff())
    inv = np.linalg.inv(vectors)
    phases = np.exp(-1j * np.outer(taus, evals))
    amp_e = phases @ (vectors[1, :] * inv[:, 0])
    return theta[2] * np.abs(amp_e) ** 2


def _wtd_survival(theta, tau):
    m = two_level(*theta)
    evals, vectors = np.linalg.eig(m.h_eff())
    inv = np.linalg.inv(vectors)
    psi = (vectors * np.exp(-1j * evals * tau)) @ inv[:, 0]
    return float(np.sum(np.abs(psi) ** 2))


def wtd_fisher_oracle(delta, omega, kappa, alpha, tau_max=None, n_grid=4001,
                      theta_step=1e-5):
    """Deterministic counting-information rate from the waiting-time density.

    Valid for the two-level atom, whose record is a renewal process: per
    interval the information is integral (d_alpha w)^2 / w, and the rate is
    that divided by the mean interval.  Doubling the grid must reproduce
    the value to 1e-4 relative, else GridTooCoarse.
    """
    if omega <= 0:
        raise InvalidParameter("waiting-time oracle requires omega > 0")
    if kappa <= 0:
        raise InvalidParameter("decay rate must be positive")
    theta = np.array([delta, omega, kappa], dtype=float)

    if tau_max is None:
        tau_max = 50.0
        while _wtd_survival(theta, tau_max) > 1e-9 and tau_max < 1e6:
            tau_max *= 2.0

    def evaluate(points):
        taus = np.linspace(0.0, tau_max, points)
        w = _wtd_curves(theta, taus)
        tp = theta.copy()
        tp[alpha] += theta_step
        tm = theta.copy()
        tm[alpha] -= theta_step
        dw = (_wtd_curves(tp, taus) - _wtd_curves(tm, taus)) / (2.0 * theta_step)
        integrand = np.where(w > 1e-300, dw ** 2 / np.clip(w, 1e-300, None), 0.0)
        info = simpson(integrand, x=taus)
        norm = simpson(w, x=taus)
        mean_tau = simpson(taus * w, x=taus)
        return info / mean_tau, mean_tau, norm

    coarse, _, _ = evaluate(n_grid)
    fine, mean_tau, norm = evaluate(2 * (n_grid - 1) + 1)
    if abs(fine - coarse) > 1e-4 * max(abs(fine), 1e-12):
        raise GridTooCoarse(
            f"oracle changed by {abs(fine - coarse):.3e} on grid doubling"
        )
    if norm < 1.0 - 1e-8:
        raise GridTooCoarse(f"waiting-time density norm {norm!r} below 1 - 1e-8")
    meta = {"mean_interval": mean_tau, "norm": norm, "tau_max": tau_max,
            "n_grid": n_grid, "theta_step": theta_step, "flags": []}
    return FisherEstimate(float(fine), (alpha, alpha), "wtd_oracle", 0.0, meta)


# --- brute-force tensor-product oracle ------------------------------------

def brute_force_overlap(m, theta1, theta2, psi0, n_steps, dt):
    """Two-sided overlap from the explicit sum over all effect-operator strings.

    Computes sum over records of <psi0| string(theta2)^dag string(theta1)
    |psi0> and, independently, the N-fold discrete two-sided map applied to
    |psi0><psi0|; the two must agree to 1e-12 (they are algebraically equal),
    and the discrete-map value is returned.
    """
    if n_steps > 12:
        raise TooManySteps(f"record enumeration limited to 12 steps, got {n_steps}")
    psi0 = np.asarray(psi0, dtype=complex)
    ops1 = effect_operators(m, theta1, dt).all_ops()
    ops2 = effect_operators(m, theta2, dt).all_ops()
    n_outcomes = len(ops1)

    # discrete two-sided map
    rho = np.outer(psi0, psi0.conj())
    for _ in range(n_steps):
        rho = sum(o1 @ rho @ o2.conj().T for o1, o2 in zip(ops1, ops2))
    map_value = complex(np.trace(rho))

    # explicit record sum, built up one step at a time over all prefixes
    states = [(psi0.copy(), psi0.copy())]
    for _ in range(n_steps):
        states = [(ops1[outcome] @ s1, ops2[outcome] @ s2)
                  for s1, s2 in states for outcome in range(n_outcomes)]
    string_value = complex(sum(np.vdot(s2, s1) for s1, s2 in states))

    if abs(string_value - map_value) > 1e-12 * max(1.0, abs(map_value)):
        raise ArithmeticError(
            f"record sum {string_value} disagrees with discrete map {map_value}"
        )
    return map_value


# --- record files ---------------------------------------------------------

def save_record(record, path):
    """Write a record to a JSON file in the documented exchange format."""
    doc = {
        "theta_sim": {"names": list(record.theta_sim.names),
                      "values": record.theta_sim.values.tolist()},
        "seed": record.seed,
        "T": record.T,
    }
    if isinstance(record, CountingRecord):
        doc["type"] = "counting"
        doc["jump_times"] = record.jump_times.tolist()
        doc["channels"] = record.channels.tolist()
    elif isinstance(record, HomodyneRecord):
        doc["type"] = "homodyne"
        doc["dt"] = record.dt
        doc["phi"] = record.phi
        doc["increments"] = record.increments.tolist()
    else:
        raise TypeError(f"unknown record type {type(record).__name__}")
    with open(path, "w") as handle:
        json.dump(doc, handle)


def load_record(path):
    with open(path) as handle:
        doc = json.load(handle)
    theta = ParameterVector(tuple(doc["theta_sim"]["names"]),
                            np.array(doc["theta_sim"]["values"]))
    if doc["type"] == "counting":
        times = np.array(doc["jump_times"])
        channels = np.array(doc.get("channels", np.zeros(len(times))),
                            dtype=np.int64)
        return CountingRecord(doc["T"], times, channels, theta, doc["seed"])
    if doc["type"] == "homodyne":
        return HomodyneRecord(doc["T"], doc["dt"], doc.get("phi", 0.0),
                              np.array(doc["increments"]), theta, doc["seed"])
    raise ValueError(f"unknown record type {doc['type']!r}")
