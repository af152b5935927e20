"""Compiled inner loops for the sequential voter processes.

Every kernel takes a ``numpy.random.Generator`` and consumes it in a fixed
order, so a (spec, params, seed) triple always produces the same tally.
Quota and capacity arrays are modified in place.
"""

import numba
import numpy as np

_jit = numba.njit(cache=True)


@_jit
def pick(rng, weights, quota):
    """Draw an index with probability proportional to ``weights[k]`` over
    indices whose ``quota[k] > 0``.

    Falls back to a uniform draw over active indices when they carry no
    weight. Returns -1 when no index is active.
    """
    n = weights.shape[0]
    total = 0.0
    active = 0
    for k in range(n):
        if quota[k] > 0:
            active += 1
            if weights[k] > 0.0:
                total += weights[k]
    if active == 0:
        return -1
    if not total > 0.0:
        j = int(rng.random() * active)
        for k in range(n):
            if quota[k] > 0:
                if j == 0:
                    return k
                j -= 1
        return -1
    u = rng.random() * total
    last = -1
    for k in range(n):
        if quota[k] > 0 and weights[k] > 0.0:
            last = k
            u -= weights[k]
            if u < 0.0:
                return k
    # rounding left a sliver of mass past the final active index
    return last


@_jit
def dm_kernel(rng, theta, sizes, quota, concentration, votes_out):
    S = sizes.shape[0]
    K = theta.shape[0]
    V = np.zeros((S, K), np.int64)
    w = np.zeros(K)
    e = 0
    for s in range(S):
        for k in range(K):
            if theta[k] > 0.0:
                w[k] = rng.gamma(concentration * theta[k])
            else:
                w[k] = 0.0
        for _ in range(sizes[s]):
            k = pick(rng, w, quota)
            if k < 0:
                return V, False
            quota[k] -= 1
            V[s, k] += 1
            votes_out[e] = k
            e += 1
    return V, True


@_jit
def dpm_kernel(rng, theta, sizes, quota, gamma, prior_count, literal, votes_out):
    S = sizes.shape[0]
    K = theta.shape[0]
    V = np.zeros((S, K), np.int64)
    w = np.zeros(K)
    e = 0
    for s in range(S):
        g = gamma[s]
        for i in range(sizes[s]):
            denom = i + prior_count * K
            for k in range(K):
                if literal:
                    local = V[s, k]
                elif denom > 0.0:
                    local = (V[s, k] + prior_count) / denom
                else:
                    local = 0.0
                w[k] = g * local + (1.0 - g) * theta[k]
            k = pick(rng, w, quota)
            if k < 0:
                return V, False
            quota[k] -= 1
            V[s, k] += 1
            votes_out[e] = k
            e += 1
    return V, True


@_jit
def _block_weights(w, d, theta, beta, literal):
    K = theta.shape[0]
    dtot = 0.0
    for k in range(K):
        dtot += d[k]
    for k in range(K):
        if literal:
            w[k] = d[k] + beta * theta[k]
        elif dtot > 0.0:
            w[k] = beta * d[k] / dtot + (1.0 - beta) * theta[k]
        else:
            w[k] = (1.0 - beta) * theta[k]


@_jit
def ecm_kernel(rng, theta, sizes, quota, alpha, beta, literal, votes_out, comm_out):
    """Community formation by a per-district CRP, then block votes.

    Joining an existing community with probability proportional to its size
    is done by copying the community of a uniformly chosen earlier elector.
    """
    S = sizes.shape[0]
    K = theta.shape[0]
    V = np.zeros((S, K), np.int64)
    w = np.zeros(K)
    feasible = np.zeros(K, np.int64)
    d = np.zeros(K)
    nmax = 0
    for s in range(S):
        if sizes[s] > nmax:
            nmax = sizes[s]
    label = np.zeros(nmax, np.int64)
    csize = np.zeros(nmax, np.int64)
    cvote = np.zeros(nmax, np.int64)
    offset = 0
    e0 = 0
    next_id = 0
    for s in range(S):
        n = sizes[s]
        nc = 0
        for i in range(n):
            if rng.random() * (i + alpha) < alpha:
                label[i] = nc
                csize[nc] = 1
                nc += 1
            else:
                j = int(rng.random() * i)
                label[i] = label[j]
                csize[label[j]] += 1
        for c in range(nc):
            b = csize[c]
            _block_weights(w, d, theta, beta, literal)
            nfeas = 0
            for k in range(K):
                if quota[k] >= b:
                    feasible[k] = 1
                    nfeas += 1
                else:
                    feasible[k] = 0
            if nfeas > 0:
                k = pick(rng, w, feasible)
                d[k] += 1.0
                quota[k] -= b
                V[s, k] += b
                cvote[c] = k
            else:
                cvote[c] = -1
        # split blocks are voted member by member, each as its own community
        for i in range(n):
            c = label[i]
            if cvote[c] >= 0:
                votes_out[e0 + i] = cvote[c]
                comm_out[e0 + i] = offset + c
            else:
                _block_weights(w, d, theta, beta, literal)
                k = pick(rng, w, quota)
                if k < 0:
                    return V, False
                d[k] += 1.0
                quota[k] -= 1
                V[s, k] += 1
                votes_out[e0 + i] = k
                comm_out[e0 + i] = offset + nc + next_id
                next_id += 1
        offset += nc + next_id
        next_id = 0
        e0 += n
    return V, True


@_jit
def pcm_kernel(rng, theta, capacity, quota, eta, literal, party_out, district_out):
    S = capacity.shape[0]
    K = theta.shape[0]
    N = 0
    for s in range(S):
        N += capacity[s]
    V = np.zeros((S, K), np.int64)
    placed = np.zeros(K)
    w = np.zeros(S)
    for i in range(N):
        k = pick(rng, theta, quota)
        if k < 0:
            return V, False
        quota[k] -= 1
        h = eta[k]
        if literal:
            u = 1.0
        else:
            # uniform weight equal to the party's current mean per district
            u = max(placed[k], 1.0) / S
        for s in range(S):
            w[s] = h * V[s, k] + (1.0 - h) * u
        s = pick(rng, w, capacity)
        if s < 0:
            return V, False
        capacity[s] -= 1
        V[s, k] += 1
        placed[k] += 1.0
        party_out[i] = k
        district_out[i] = s
    return V, True


@_jit
def sim_placement_kernel(rng, community, num_communities, capacity, alpha):
    """Place electors into districts, rich-get-richer within each community.

    District weight is ``alpha * (members of the elector's community already
    there) + (1 - alpha)``, over districts with free capacity.
    """
    N = community.shape[0]
    S = capacity.shape[0]
    counts = np.zeros((S, num_communities))
    w = np.zeros(S)
    Z = np.zeros(N, np.int64)
    for i in range(N):
        c = community[i]
        for s in range(S):
            w[s] = alpha * counts[s, c] + (1.0 - alpha)
        s = pick(rng, w, capacity)
        if s < 0:
            return Z, False
        capacity[s] -= 1
        counts[s, c] += 1.0
        Z[i] = s
    return Z, True
