"""Numba event loops shared by the simulators.

Every kernel takes a raw xoshiro256++ state (uint64[4]) and mutates its
array arguments in place.  All kernels are compiled ``nogil`` so replica
fan-out over a thread pool runs them concurrently.

Time is advanced by a single Gillespie clock per process; the total event
rate of each process here is constant (walk/voter components fire at a
fixed aggregate rate and the rewiring clock at nu*dn/4), so the next
event time is one exponential draw and the event class is a uniform draw
against the rate split.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .rng import exponential, randbelow, standard_normal, uniform01


@njit(cache=True, nogil=True)
def rewire_burst(match, state, events):
    """Apply ``events`` rewiring ticks; returns how many were applied."""
    dn = match.size
    applied = 0
    for _ in range(events):
        a = randbelow(state, dn)
        b = randbelow(state, dn)
        if b == a or match[a] == b:
            continue
        a2 = match[a]
        b2 = match[b]
        match[a] = b
        match[b] = a
        match[a2] = b2
        match[b2] = a2
        applied += 1
    return applied


@njit(cache=True, nogil=True)
def involution_ok(match):
    """True when match is a fixed-point-free involution."""
    for s in range(match.size):
        m = match[s]
        if m == s or match[m] != s:
            return False
    return True


@njit(cache=True, nogil=True)
def two_walks(match, d, nu, x, y, t_cap, state):
    """Two rate-1 walks on the rewiring graph; returns (tau, met).

    Stops at the first coincidence or censors at t_cap (met = False).
    The match array evolves in place.
    """
    if x == y:
        return 0.0, True
    dn = match.size
    rate_rewire = nu * dn / 4.0
    total = rate_rewire + 2.0
    t = 0.0
    while True:
        t += exponential(state, total)
        if t > t_cap:
            return t_cap, False
        u = uniform01(state) * total
        if u < rate_rewire:
            a = randbelow(state, dn)
            b = randbelow(state, dn)
            if b == a or match[a] == b:
                continue
            a2 = match[a]
            b2 = match[b]
            match[a] = b
            match[b] = a
            match[a2] = b2
            match[b2] = a2
        else:
            stub_k = randbelow(state, d)
            if u < rate_rewire + 1.0:
                x = match[x * d + stub_k] // d
            else:
                y = match[y * d + stub_k] // d
            if x == y:
                return t, True


@njit(cache=True, nogil=True)
def count_discordant(match, opin, d):
    """Number of edges (unordered stub pairs) with differing end opinions."""
    disc = 0
    for s in range(match.size):
        m = match[s]
        if m > s and opin[s // d] != opin[m // d]:
            disc += 1
    return disc


@njit(cache=True, nogil=True)
def bernoulli_fill(opin, u, state):
    ones = 0
    for i in range(opin.size):
        if uniform01(state) < u:
            opin[i] = 1
            ones += 1
        else:
            opin[i] = 0
    return ones


@njit(cache=True, nogil=True)
def voter_run(match, opin, d, nu, horizon, grid, state, out_o, out_d, out_int_d, out_int_oo):
    """Voter model on the rewiring graph, sampled on ``grid``.

    Each vertex fires at rate 1, picks one of its d stubs uniformly and
    copies the opinion at the other end.  The discordant-edge count is
    maintained incrementally; running integrals of D_t and O_t(1-O_t) are
    accumulated exactly (piecewise constant between events) and written
    at every grid time.  grid must be increasing and inside [0, horizon].

    Returns the consensus time, or -1.0 when consensus is not reached.
    """
    dn = match.size
    n = dn // d
    ones = 0
    for i in range(n):
        if opin[i] != 0:
            ones += 1
    disc = count_discordant(match, opin, d)
    rate_rewire = nu * dn / 4.0
    rate_voter = float(n)
    total = rate_rewire + rate_voter
    inv_n = 1.0 / n
    t = 0.0
    int_d = 0.0
    int_oo = 0.0
    gi = 0
    consensus = -1.0
    while True:
        o_val = ones * inv_n
        d_val = 2.0 * disc / dn
        oo_val = o_val * (1.0 - o_val)
        t_next = t + exponential(state, total)
        stop = t_next >= horizon
        t_edge = horizon if stop else t_next
        while gi < grid.size and grid[gi] <= t_edge:
            gdt = grid[gi] - t
            out_o[gi] = o_val
            out_d[gi] = d_val
            out_int_d[gi] = int_d + d_val * gdt
            out_int_oo[gi] = int_oo + oo_val * gdt
            gi += 1
        if stop:
            break
        int_d += d_val * (t_next - t)
        int_oo += oo_val * (t_next - t)
        t = t_next
        u = uniform01(state) * total
        if u < rate_rewire:
            a = randbelow(state, dn)
            b = randbelow(state, dn)
            if b == a or match[a] == b:
                continue
            a2 = match[a]
            b2 = match[b]
            # discordance of the two edges about to be removed
            if opin[a // d] != opin[a2 // d]:
                disc -= 1
            if opin[b // d] != opin[b2 // d]:
                disc -= 1
            match[a] = b
            match[b] = a
            match[a2] = b2
            match[b2] = a2
            if opin[a // d] != opin[b // d]:
                disc += 1
            if opin[a2 // d] != opin[b2 // d]:
                disc += 1
        else:
            x = randbelow(state, n)
            v = match[x * d + randbelow(state, d)] // d
            if opin[v] != opin[x]:
                newop = opin[v]
                opin[x] = newop
                ones += 1 if newop == 1 else -1
                for k in range(d):
                    yv = match[x * d + k] // d
                    if yv != x:
                        if opin[yv] != newop:
                            disc += 1
                        else:
                            disc -= 1
                if ones == 0 or ones == n:
                    consensus = t
                    o_val = ones * inv_n
                    while gi < grid.size:
                        out_o[gi] = o_val
                        out_d[gi] = 0.0
                        out_int_d[gi] = int_d
                        out_int_oo[gi] = int_oo
                        gi += 1
                    break
    return consensus


@njit(cache=True, nogil=True)
def chain_run_kernel(i0, d, nu, state):
    """Killed distance chain on {0, 1, 2, ...} + absorbing dagger.

    From i >= 1: up at rate 2(d-1)/d, down at rate 2/d, dagger at nu*i.
    From 0: up at rate 2 (no killing).  Started at i0 >= 1 the run stops
    on the first arrival at 0 (outcome 0) or at dagger (outcome 1);
    started at i0 == 0 it runs through excursions until dagger while
    accumulating the local time at 0.  Returns (outcome, elapsed, local0).
    """
    up = 2.0 * (d - 1) / d
    down = 2.0 / d
    i = i0
    t = 0.0
    local0 = 0.0
    while True:
        if i == 0:
            hold = exponential(state, 2.0)
            t += hold
            local0 += hold
            i = 1
        else:
            rate = 2.0 + nu * i
            t += exponential(state, rate)
            u = uniform01(state) * rate
            if u < up:
                i += 1
            elif u < 2.0:
                i -= 1
                if i == 0 and i0 >= 1:
                    return 0, t, local0
            else:
                return 1, t, local0


@njit(cache=True, nogil=True)
def two_phase_run(d, nu, gamma_pairs, cumw, state):
    """One run of the two-phase merge/approach renewal process.

    Repeats: wait Exp(gamma_pairs) for a merge (gamma_pairs is the total
    unthinned rate of component-joining stub pairs), draw the resulting
    walk distance ell from the weight table cumw (cumulative sums of
    ell*(d-1)^ell, ell = 1..L), then run the killed distance chain from
    ell; arrival at 0 ends the whole run, dagger starts a new round.
    Returns (tau_first_total, tau_second_total, rounds).
    """
    w_total = cumw[cumw.size - 1]
    tau1 = 0.0
    tau2 = 0.0
    rounds = 0
    while True:
        rounds += 1
        tau1 += exponential(state, gamma_pairs)
        u = uniform01(state) * w_total
        ell = np.searchsorted(cumw, u, side="right") + 1
        outcome, elapsed, _ = chain_run_kernel(ell, d, nu, state)
        tau2 += elapsed
        if outcome == 0:
            return tau1, tau2, rounds


@njit(cache=True, nogil=True)
def fw_path(theta2, u, dt, values, state):
    """Euler-Maruyama path of dB = sqrt(theta2 * B(1-B)) dW on [0, 1]-clamped.

    theta2 is the full diffusion coefficient factor (2*theta).  values[k]
    receives B at time k*dt (values[0] = u).  Once a step is clamped to
    an endpoint the path is absorbed there.  Returns 0, 1 or -1 for the
    absorption side (-1: not absorbed).
    """
    b = u
    values[0] = b
    absorbed = -1
    sqdt = np.sqrt(dt)
    for k in range(1, values.size):
        if absorbed < 0:
            var = theta2 * b * (1.0 - b)
            if var > 0.0:
                b += np.sqrt(var) * sqdt * standard_normal(state)
            if b <= 0.0:
                b = 0.0
                absorbed = 0
            elif b >= 1.0:
                b = 1.0
                absorbed = 1
        values[k] = b
    return absorbed
