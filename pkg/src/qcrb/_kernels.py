"""Numba-compiled inner loops for trajectory simulation and filtering.

These kernels are deliberately free of allocation inside the time loop and
use hand-rolled small-matrix products: for Hilbert dimensions L <= ~16 a
BLAS call per step would cost more than the arithmetic.  All kernels are
pure functions of their inputs (noise is passed in, never generated here),
which is what makes trajectory-level determinism trivial.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def survival(c, mu, t):
    """S(t) = Re sum_q c_q exp(mu_q t) (flattened spectral form)."""
    acc = 0.0
    for q in range(c.shape[0]):
        acc += (c[q] * np.exp(mu[q] * t)).real
    return acc


@njit(cache=True, nogil=True)
def invert_survival(c, mu, u, t_max):
    """Solve S(t) = u for the (nonincreasing) survival probability.

    Returns -1.0 when the trajectory survives past t_max without jumping.
    Bisection to ~1e-13 absolute-in-t; S is cheap in spectral form.
    """
    if survival(c, mu, t_max) >= u:
        return -1.0
    lo = 0.0
    hi = t_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if survival(c, mu, mid) >= u:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@njit(cache=True, nogil=True)
def _sandwich(k, rho, t1, out):
    """out = k rho k^dag, via t1 = k rho.  Returns the (real) trace of out."""
    n = rho.shape[0]
    for a in range(n):
        for b in range(n):
            acc = 0.0 + 0.0j
            for q in range(n):
                acc += k[a, q] * rho[q, b]
            t1[a, b] = acc
    tr = 0.0
    for a in range(n):
        for b in range(n):
            acc = 0.0 + 0.0j
            for q in range(n):
                acc += t1[a, q] * np.conj(k[b, q])
            out[a, b] = acc
        tr += out[a, a].real
    return tr


@njit(cache=True, nogil=True)
def homodyne_simulate(k0, lphi, x, rho0, dt, noise):
    """Generate homodyne increments dy_i = <x> dt + dW from a normalized filter."""
    n = noise.shape[0]
    dim = rho0.shape[0]
    rho = rho0.astype(np.complex128).copy()
    k = np.empty((dim, dim), np.complex128)
    t1 = np.empty((dim, dim), np.complex128)
    t2 = np.empty((dim, dim), np.complex128)
    dys = np.empty(n, np.float64)
    sqdt = np.sqrt(dt)
    for i in range(n):
        r = 0.0
        for a in range(dim):
            for b in range(dim):
                r += (x[a, b] * rho[b, a]).real
        dy = r * dt + sqdt * noise[i]
        dys[i] = dy
        for a in range(dim):
            for b in range(dim):
                k[a, b] = k0[a, b] + lphi[a, b] * dy
        tr = _sandwich(k, rho, t1, t2)
        for a in range(dim):
            for b in range(dim):
                rho[a, b] = t2[a, b] / tr
    return dys


@njit(cache=True, nogil=True)
def homodyne_loglik(k0, lphi, rho0, dt, dys, i_start):
    """Window log-likelihood log Tr rho~(T) - log Tr rho~(t_start).

    The unnormalized Kraus filter is renormalized every step with the log
    factor accumulated, so no underflow for any record length.  The
    Gaussian reference-measure term is dropped (it carries no parameter
    dependence for a fixed record).
    """
    n = dys.shape[0]
    dim = rho0.shape[0]
    rho = rho0.astype(np.complex128).copy()
    k = np.empty((dim, dim), np.complex128)
    t1 = np.empty((dim, dim), np.complex128)
    t2 = np.empty((dim, dim), np.complex128)
    ll = 0.0
    ll0 = 0.0
    for i in range(n):
        if i == i_start:
            ll0 = ll
        for a in range(dim):
            for b in range(dim):
                k[a, b] = k0[a, b] + lphi[a, b] * dys[i]
        tr = _sandwich(k, rho, t1, t2)
        ll += np.log(tr)
        for a in range(dim):
            for b in range(dim):
                rho[a, b] = t2[a, b] / tr
    return ll - ll0


@njit(cache=True, nogil=True)
def homodyne_scores_generic(k0_sim, lphi_sim, x, k0_p, lphi_p, k0_m, lphi_m,
                            rho0, dt, noise, i_start):
    """Fused simulate-and-score pass for one homodyne trajectory.

    Runs the normalized simulation filter (generating the record on the
    fly) together with two unnormalized likelihood filters at perturbed
    parameters; returns their window log-likelihoods.  Equivalent to
    homodyne_simulate followed by two homodyne_loglik calls, without
    storing the record.
    """
    n = noise.shape[0]
    dim = rho0.shape[0]
    rs = rho0.astype(np.complex128).copy()
    rp = rho0.astype(np.complex128).copy()
    rm = rho0.astype(np.complex128).copy()
    k = np.empty((dim, dim), np.complex128)
    t1 = np.empty((dim, dim), np.complex128)
    t2 = np.empty((dim, dim), np.complex128)
    sqdt = np.sqrt(dt)
    llp = 0.0
    llm = 0.0
    llp0 = 0.0
    llm0 = 0.0
    for i in range(n):
        if i == i_start:
            llp0 = llp
            llm0 = llm
        r = 0.0
        for a in range(dim):
            for b in range(dim):
                r += (x[a, b] * rs[b, a]).real
        dy = r * dt + sqdt * noise[i]

        for a in range(dim):
            for b in range(dim):
                k[a, b] = k0_sim[a, b] + lphi_sim[a, b] * dy
        tr = _sandwich(k, rs, t1, t2)
        for a in range(dim):
            for b in range(dim):
                rs[a, b] = t2[a, b] / tr

        for a in range(dim):
            for b in range(dim):
                k[a, b] = k0_p[a, b] + lphi_p[a, b] * dy
        tr = _sandwich(k, rp, t1, t2)
        llp += np.log(tr)
        for a in range(dim):
            for b in range(dim):
                rp[a, b] = t2[a, b] / tr

        for a in range(dim):
            for b in range(dim):
                k[a, b] = k0_m[a, b] + lphi_m[a, b] * dy
        tr = _sandwich(k, rm, t1, t2)
        llm += np.log(tr)
        for a in range(dim):
            for b in range(dim):
                rm[a, b] = t2[a, b] / tr
    return llp - llp0, llm - llm0


@njit(cache=True, nogil=True, fastmath=True)
def homodyne_scores_2x2(k0s, ls, x, k0p, lp, k0m, lm, rho0, dt, noise, i_start):
    """Unrolled qubit specialization of homodyne_scores_generic.

    Log factors are accumulated as a running product and flushed to log
    space only when they leave [1e-100, 1e100]; per-trace log calls would
    otherwise dominate the step cost.
    """
    n = noise.shape[0]
    s00 = rho0[0, 0]; s01 = rho0[0, 1]; s10 = rho0[1, 0]; s11 = rho0[1, 1]
    p00 = s00; p01 = s01; p10 = s10; p11 = s11
    m00 = s00; m01 = s01; m10 = s10; m11 = s11
    sqdt = np.sqrt(dt)
    llp = 0.0; llm = 0.0; llp0 = 0.0; llm0 = 0.0
    accp = 1.0; accm = 1.0
    x00 = x[0, 0]; x01 = x[0, 1]; x10 = x[1, 0]; x11 = x[1, 1]
    for i in range(n):
        if i == i_start:
            llp0 = llp + np.log(accp)
            llm0 = llm + np.log(accm)
        r = (x00 * s00 + x01 * s10 + x10 * s01 + x11 * s11).real
        dy = r * dt + sqdt * noise[i]

        a00 = k0s[0, 0] + ls[0, 0] * dy; a01 = k0s[0, 1] + ls[0, 1] * dy
        a10 = k0s[1, 0] + ls[1, 0] * dy; a11 = k0s[1, 1] + ls[1, 1] * dy
        t00 = a00 * s00 + a01 * s10; t01 = a00 * s01 + a01 * s11
        t10 = a10 * s00 + a11 * s10; t11 = a10 * s01 + a11 * s11
        n00 = t00 * np.conj(a00) + t01 * np.conj(a01)
        n01 = t00 * np.conj(a10) + t01 * np.conj(a11)
        n10 = t10 * np.conj(a00) + t11 * np.conj(a01)
        n11 = t10 * np.conj(a10) + t11 * np.conj(a11)
        inv = 1.0 / (n00 + n11).real
        s00 = n00 * inv; s01 = n01 * inv; s10 = n10 * inv; s11 = n11 * inv

        a00 = k0p[0, 0] + lp[0, 0] * dy; a01 = k0p[0, 1] + lp[0, 1] * dy
        a10 = k0p[1, 0] + lp[1, 0] * dy; a11 = k0p[1, 1] + lp[1, 1] * dy
        t00 = a00 * p00 + a01 * p10; t01 = a00 * p01 + a01 * p11
        t10 = a10 * p00 + a11 * p10; t11 = a10 * p01 + a11 * p11
        n00 = t00 * np.conj(a00) + t01 * np.conj(a01)
        n01 = t00 * np.conj(a10) + t01 * np.conj(a11)
        n10 = t10 * np.conj(a00) + t11 * np.conj(a01)
        n11 = t10 * np.conj(a10) + t11 * np.conj(a11)
        tr = (n00 + n11).real
        accp *= tr
        inv = 1.0 / tr
        p00 = n00 * inv; p01 = n01 * inv; p10 = n10 * inv; p11 = n11 * inv

        a00 = k0m[0, 0] + lm[0, 0] * dy; a01 = k0m[0, 1] + lm[0, 1] * dy
        a10 = k0m[1, 0] + lm[1, 0] * dy; a11 = k0m[1, 1] + lm[1, 1] * dy
        t00 = a00 * m00 + a01 * m10; t01 = a00 * m01 + a01 * m11
        t10 = a10 * m00 + a11 * m10; t11 = a10 * m01 + a11 * m11
        n00 = t00 * np.conj(a00) + t01 * np.conj(a01)
        n01 = t00 * np.conj(a10) + t01 * np.conj(a11)
        n10 = t10 * np.conj(a00) + t11 * np.conj(a01)
        n11 = t10 * np.conj(a10) + t11 * np.conj(a11)
        tr = (n00 + n11).real
        accm *= tr
        inv = 1.0 / tr
        m00 = n00 * inv; m01 = n01 * inv; m10 = n10 * inv; m11 = n11 * inv

        if accp < 1e-100 or accp > 1e100:
            llp += np.log(accp)
            accp = 1.0
        if accm < 1e-100 or accm > 1e100:
            llm += np.log(accm)
            accm = 1.0
    return llp + np.log(accp) - llp0, llm + np.log(accm) - llm0


def homodyne_scores(k0_sim, lphi_sim, x, k0_p, lphi_p, k0_m, lphi_m,
                    rho0, dt, noise, i_start):
    """Dispatch to the qubit specialization when the model is 2x2."""
    if rho0.shape[0] == 2:
        return homodyne_scores_2x2(k0_sim, lphi_sim, x, k0_p, lphi_p,
                                   k0_m, lphi_m, rho0, dt, noise, i_start)
    return homodyne_scores_generic(k0_sim, lphi_sim, x, k0_p, lphi_p,
                                   k0_m, lphi_m, rho0, dt, noise, i_start)
