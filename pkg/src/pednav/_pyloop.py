"""Pure-Python reference implementation of the closed-loop filter run.

This backend defines the semantics; the compiled kernel in
``_kernels.pyx`` mirrors it operation for operation. It is composed
from the public single-step operations so that every contract they
enforce also holds inside a full run.
"""

from __future__ import annotations

import numpy as np

from .core import ImuSample, reorthogonalize
from .smins import (
    ErrorStateFilter,
    ImuBiases,
    NavState,
    build_system_matrices,
    ekf_predict,
    ekf_update,
    inject_and_reset,
    strapdown_step,
    zar_residual,
    zvu_residual,
)

REORTH_EVERY = 100


def run_loop(
    t: np.ndarray,
    f: np.ndarray,
    w: np.ndarray,
    stationary: np.ndarray,
    p0: np.ndarray,
    v0: np.ndarray,
    c0: np.ndarray,
    ba0: np.ndarray,
    bg0: np.ndarray,
    filt: ErrorStateFilter,
    use_zvu: bool,
    use_zar: bool,
    g: float,
) -> dict:
    n = t.size
    positions = np.empty((n, 3))
    velocities = np.empty((n, 3))
    attitudes = np.empty((n, 3, 3))
    ptrace = np.empty(n)
    innov = np.full((n, 6), np.nan)
    ba_hist = np.empty((n, 3))
    bg_hist = np.empty((n, 3))

    state = NavState(p=p0, v=v0, T_rb=c0.T, t=float(t[0]))
    biases = ImuBiases(acc=ba0, gyro=bg0)

    positions[0] = state.p
    velocities[0] = state.v
    attitudes[0] = state.T_rb.T
    ptrace[0] = np.trace(filt.P)
    ba_hist[0] = biases.acc
    bg_hist[0] = biases.gyro

    for k in range(1, n):
        dt = float(t[k] - t[k - 1])
        sample = ImuSample(t=float(t[k]), f=f[k] - biases.acc, w=w[k] - biases.gyro)
        state = strapdown_step(state, sample, dt, g)
        F, G = build_system_matrices(state, sample)
        ekf_predict(filt, F, dt, G)

        if stationary[k] and (use_zvu or use_zar):
            blocks = []
            if use_zvu:
                dz_v, H_v = zvu_residual(state)
                blocks.append((dz_v, H_v, filt.R_zvu))
                innov[k, 0:3] = dz_v
            if use_zar:
                dz_w, H_w = zar_residual(sample)
                blocks.append((dz_w, H_w, filt.R_zar))
                innov[k, 3:6] = dz_w
            dz = np.concatenate([b[0] for b in blocks])
            H = np.vstack([b[1] for b in blocks])
            m = dz.size
            R = np.zeros((m, m))
            off = 0
            for b in blocks:
                R[off : off + 3, off : off + 3] = b[2]
                off += 3
            ekf_update(filt, dz, H, R)
            state, biases = inject_and_reset(state, biases, filt.dx)
            filt.dx = np.zeros(filt.dx.size)

        if k % REORTH_EVERY == 0:
            state = NavState(p=state.p, v=state.v, T_rb=reorthogonalize(state.T_rb), t=state.t)

        positions[k] = state.p
        velocities[k] = state.v
        attitudes[k] = state.T_rb.T
        ptrace[k] = np.trace(filt.P)
        ba_hist[k] = biases.acc
        bg_hist[k] = biases.gyro

    return {
        "p": positions,
        "v": velocities,
        "c": attitudes,
        "ptrace": ptrace,
        "innov": innov,
        "ba": ba_hist,
        "bg": bg_hist,
    }
