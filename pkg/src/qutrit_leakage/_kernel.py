"""Compiled cycle loop.

Mirrors :class:`qutrit_leakage.protocol.CycleRunner` step for step and
consumes pre-drawn uniforms in the same order: per cycle six damping draws
(ancilla then data, after H, CZ, H) when noise is on, then one readout draw.
"""
from __future__ import annotations

import numpy as np
from numba import njit

DRAWS_NOISY = 7
DRAWS_CLEAN = 1


@njit(cache=True)
def _pick(probs, u):
    total = 0.0
    for p in probs:
        total += p
    x = u * total
    acc = 0.0
    k = len(probs) - 1
    for i in range(len(probs)):
        acc += probs[i]
        if acc > x:
            k = i
            break
    while probs[k] == 0.0:
        k -= 1
    return k


@njit(cache=True)
def _damp(psi, kops, slot, u):
    branches = np.zeros((3, 9), dtype=np.complex128)
    probs = np.zeros(3)
    for k in range(3):
        for a in range(3):
            for d in range(3):
                s = 0j
                for b in range(3):
                    if slot == 0:
                        s += kops[k, a, b] * psi[3 * b + d]
                    else:
                        s += kops[k, d, b] * psi[3 * a + b]
                branches[k, 3 * a + d] = s
                probs[k] += s.real * s.real + s.imag * s.imag
    total = probs.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError("Kraus branch probabilities do not sum to 1")
    k = _pick(probs, u)
    return branches[k] / np.sqrt(probs[k])


@njit(cache=True)
def _reset(psi):
    w = np.zeros(3)
    for a in range(3):
        for d in range(3):
            v = psi[3 * a + d]
            w[a] += v.real * v.real + v.imag * v.imag
    k = np.argmax(w)
    if w[k] < 1.0 - 1e-9:
        raise ValueError("ancilla is not in a basis state; measure before reset")
    out = np.zeros(9, dtype=np.complex128)
    norm = np.sqrt(w[k])
    for d in range(3):
        out[d] = psi[3 * k + d] / norm
    return out


@njit(cache=True)
def run_cycles(psi, h9, cz, kh, kcz, noisy, binary, u, outcomes, pops, log):
    """Advance ``psi`` through len(outcomes) cycles in place of the Python loop."""
    n = outcomes.shape[0]
    j = 0
    for i in range(n):
        psi = _reset(psi)
        psi = h9 @ psi
        if noisy:
            psi = _damp(psi, kh, 0, u[j])
            psi = _damp(psi, kh, 1, u[j + 1])
        psi = cz @ psi
        if noisy:
            psi = _damp(psi, kcz, 0, u[j + 2])
            psi = _damp(psi, kcz, 1, u[j + 3])
        psi = h9 @ psi
        if noisy:
            psi = _damp(psi, kh, 0, u[j + 4])
            psi = _damp(psi, kh, 1, u[j + 5])
            j += 6
        probs = np.zeros(3)
        pd = np.zeros(3)
        for a in range(3):
            for d in range(3):
                v = psi[3 * a + d]
                p = v.real * v.real + v.imag * v.imag
                probs[a] += p
                pd[d] += p
        if log:
            pops[i, 0] = pd[0]
            pops[i, 1] = pd[1]
            pops[i, 2] = pd[2]
            pops[i, 3] = probs[2]
        k = _pick(probs, u[j])
        j += 1
        out = np.zeros(9, dtype=np.complex128)
        norm = np.sqrt(probs[k])
        for d in range(3):
            out[3 * k + d] = psi[3 * k + d] / norm
        psi = out
        outcomes[i] = 1 if (binary and k == 2) else k
    return psi
