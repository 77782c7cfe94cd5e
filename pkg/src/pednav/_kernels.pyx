# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled closed-loop filter kernel.

Mirrors ``_pyloop.run_loop`` operation for operation: rational attitude
update, Euler velocity/position updates, first-order covariance
propagation, stacked zero-velocity / zero-angular-rate updates with
closed-loop feedback, and periodic re-orthogonalization. Kept in sync
with the Python reference; the parity test suite compares both.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

from .errors import NumericalHealthError, ValidationError

cnp.import_array()

cdef int REORTH_EVERY = 100


cdef inline void mat3_mul(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out) noexcept:
    cdef int i, j, k
    cdef double s
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += a[i, k] * b[k, j]
            out[i, j] = s


cdef inline int mat3_inv(double[:, ::1] a, double[:, ::1] out) except -1:
    cdef double det
    out[0, 0] = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    out[0, 1] = a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]
    out[0, 2] = a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]
    out[1, 0] = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    out[1, 1] = a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
    out[1, 2] = a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]
    out[2, 0] = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    out[2, 1] = a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]
    out[2, 2] = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    det = a[0, 0] * out[0, 0] + a[0, 1] * out[1, 0] + a[0, 2] * out[2, 0]
    if det == 0.0:
        raise NumericalHealthError("singular attitude-update denominator")
    cdef int i, j
    for i in range(3):
        for j in range(3):
            out[i, j] /= det
    return 0


cdef inline void reorth3(double[:, ::1] c, double[:, ::1] tmp_a, double[:, ::1] tmp_b) noexcept:
    # c <- ((3 I - c c^T) / 2) c, one symmetric orthogonalization step
    cdef int i, j, k
    cdef double s
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += c[i, k] * c[j, k]
            tmp_a[i, j] = -0.5 * s
        tmp_a[i, i] += 1.5
    mat3_mul(tmp_a, c, tmp_b)
    for i in range(3):
        for j in range(3):
            c[i, j] = tmp_b[i, j]


cdef inline void mm15(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out, bint bt) noexcept:
    # out = a @ b, or a @ b.T when bt is set
    cdef int i, j, k
    cdef double s
    for i in range(15):
        for j in range(15):
            s = 0.0
            if bt:
                for k in range(15):
                    s += a[i, k] * b[j, k]
            else:
                for k in range(15):
                    s += a[i, k] * b[k, j]
            out[i, j] = s


cdef inline int chol_factor(double[:, ::1] s, int m) except -1:
    # in-place lower-triangular Cholesky with a conditioning guard
    cdef int i, j, k
    cdef double acc, dmin, dmax
    for j in range(m):
        acc = s[j, j]
        for k in range(j):
            acc -= s[j, k] * s[j, k]
        if acc <= 0.0:
            raise NumericalHealthError("innovation covariance not positive definite")
        s[j, j] = sqrt(acc)
        for i in range(j + 1, m):
            acc = s[i, j]
            for k in range(j):
                acc -= s[i, k] * s[j, k]
            s[i, j] = acc / s[j, j]
    dmin = s[0, 0]
    dmax = s[0, 0]
    for j in range(1, m):
        if s[j, j] < dmin:
            dmin = s[j, j]
        if s[j, j] > dmax:
            dmax = s[j, j]
    if dmax * dmax > 1e12 * dmin * dmin:
        raise NumericalHealthError("ill-conditioned innovation covariance")
    return 0


cdef inline void chol_solve(double[:, ::1] l, int m, double* rhs) noexcept:
    # solve L L^T x = rhs in place
    cdef int i, k
    cdef double acc
    for i in range(m):
        acc = rhs[i]
        for k in range(i):
            acc -= l[i, k] * rhs[k]
        rhs[i] = acc / l[i, i]
    for i in range(m - 1, -1, -1):
        acc = rhs[i]
        for k in range(i + 1, m):
            acc -= l[k, i] * rhs[k]
        rhs[i] = acc / l[i, i]


def run_loop(
    t_in,
    f_in,
    w_in,
    stationary_in,
    p0,
    v0,
    c0,
    ba0,
    bg0,
    filt,
    bint use_zvu,
    bint use_zar,
    double g,
):
    cdef double[::1] t = np.ascontiguousarray(t_in, dtype=np.float64)
    cdef double[:, ::1] f = np.ascontiguousarray(f_in, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef unsigned char[::1] stat = np.ascontiguousarray(stationary_in, dtype=np.uint8)
    cdef Py_ssize_t n = t.shape[0]

    positions = np.empty((n, 3))
    velocities = np.empty((n, 3))
    attitudes = np.empty((n, 3, 3))
    ptrace = np.empty(n)
    innov = np.full((n, 6), np.nan)
    ba_hist = np.empty((n, 3))
    bg_hist = np.empty((n, 3))
    cdef double[:, ::1] pos_v = positions
    cdef double[:, ::1] vel_v = velocities
    cdef double[:, :, ::1] att_v = attitudes
    cdef double[::1] ptr_v = ptrace
    cdef double[:, ::1] innov_v = innov
    cdef double[:, ::1] ba_v = ba_hist
    cdef double[:, ::1] bg_v = bg_hist

    P_arr = np.array(filt.P, dtype=np.float64, copy=True, order="C")
    wpsd_arr = np.ascontiguousarray(filt.w_psd, dtype=np.float64)
    r_zvu_arr = np.ascontiguousarray(filt.R_zvu, dtype=np.float64)
    r_zar_arr = np.ascontiguousarray(filt.R_zar, dtype=np.float64)
    cdef double[:, ::1] P = P_arr
    cdef double[::1] wpsd = wpsd_arr
    cdef double[:, ::1] r_zvu = r_zvu_arr
    cdef double[:, ::1] r_zar = r_zar_arr

    work_phi = np.zeros((15, 15))
    work_tmp = np.zeros((15, 15))
    work_pn = np.zeros((15, 15))
    cdef double[:, ::1] phi = work_phi
    cdef double[:, ::1] tmp15 = work_tmp
    cdef double[:, ::1] pn = work_pn

    c_arr = np.array(c0, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] c = c_arr
    work_a3 = np.zeros((3, 3))
    work_b3 = np.zeros((3, 3))
    work_c3 = np.zeros((3, 3))
    work_d3 = np.zeros((3, 3))
    cdef double[:, ::1] a3 = work_a3
    cdef double[:, ::1] b3 = work_b3
    cdef double[:, ::1] c3 = work_c3
    cdef double[:, ::1] d3 = work_d3

    work_s = np.zeros((6, 6))
    work_k = np.zeros((15, 6))
    cdef double[:, ::1] smat = work_s
    cdef double[:, ::1] kmat = work_k

    cdef double p[3]
    cdef double v[3]
    cdef double ba[3]
    cdef double bg[3]
    cdef double fc[3]
    cdef double wc[3]
    cdef double fr[3]
    cdef double dz[6]
    cdef double rhs[6]
    cdef double dx[15]
    cdef int sel[6]
    cdef double eps0, eps1, eps2
    cdef Py_ssize_t k, i, j, kk
    cdef int m, row
    cdef double dt, wnorm, trace, dmin, s, vprev0, vprev1, vprev2

    for i in range(3):
        p[i] = p0[i]
        v[i] = v0[i]
        ba[i] = ba0[i]
        bg[i] = bg0[i]

    trace = 0.0
    for i in range(15):
        trace += P[i, i]
    for i in range(3):
        pos_v[0, i] = p[i]
        vel_v[0, i] = v[i]
        ba_v[0, i] = ba[i]
        bg_v[0, i] = bg[i]
        for j in range(3):
            att_v[0, i, j] = c[i, j]
    ptr_v[0] = trace

    for k in range(1, n):
        dt = t[k] - t[k - 1]
        if not (0.0 < dt <= 0.05):
            raise ValidationError(f"dt must be in (0, 0.05] s, got {dt}")
        for i in range(3):
            fc[i] = f[k, i] - ba[i]
            wc[i] = w[k, i] - bg[i]
        wnorm = sqrt(wc[0] * wc[0] + wc[1] * wc[1] + wc[2] * wc[2])
        if wnorm * dt >= 2.0:
            raise NumericalHealthError("|w| dt too large for the rational attitude update")

        # attitude: c <- c (2I + W dt)(2I - W dt)^-1
        a3[0, 0] = 2.0
        a3[0, 1] = -wc[2] * dt
        a3[0, 2] = wc[1] * dt
        a3[1, 0] = wc[2] * dt
        a3[1, 1] = 2.0
        a3[1, 2] = -wc[0] * dt
        a3[2, 0] = -wc[1] * dt
        a3[2, 1] = wc[0] * dt
        a3[2, 2] = 2.0
        for i in range(3):
            for j in range(3):
                b3[i, j] = -a3[i, j]
            b3[i, i] = 4.0 - a3[i, i]
        mat3_inv(b3, c3)
        mat3_mul(c, a3, d3)
        mat3_mul(d3, c3, b3)
        for i in range(3):
            for j in range(3):
                c[i, j] = b3[i, j]

        # velocity with the updated attitude, position with the previous velocity
        vprev0 = v[0]
        vprev1 = v[1]
        vprev2 = v[2]
        for i in range(3):
            fr[i] = c[i, 0] * fc[0] + c[i, 1] * fc[1] + c[i, 2] * fc[2]
        v[0] += dt * fr[0]
        v[1] += dt * fr[1]
        v[2] += dt * (fr[2] + g)
        p[0] += dt * vprev0
        p[1] += dt * vprev1
        p[2] += dt * vprev2

        # Phi = I + F dt with the sparse error-dynamics blocks
        for i in range(15):
            for j in range(15):
                phi[i, j] = 0.0
            phi[i, i] = 1.0
        for i in range(3):
            phi[i, 3 + i] = dt
        # velocity/attitude coupling: -skew(C f) dt
        phi[3, 7] = fr[2] * dt
        phi[3, 8] = -fr[1] * dt
        phi[4, 6] = -fr[2] * dt
        phi[4, 8] = fr[0] * dt
        phi[5, 6] = fr[1] * dt
        phi[5, 7] = -fr[0] * dt
        for i in range(3):
            for j in range(3):
                phi[3 + i, 9 + j] = c[i, j] * dt
                phi[6 + i, 12 + j] = c[i, j] * dt

        mm15(phi, P, tmp15, 0)
        mm15(tmp15, phi, pn, 1)
        # process noise: rotated white-noise blocks plus bias random walks
        for i in range(3):
            for j in range(3):
                s = 0.0
                for kk in range(3):
                    s += c[i, kk] * wpsd[kk] * c[j, kk]
                pn[3 + i, 3 + j] += s * dt
                s = 0.0
                for kk in range(3):
                    s += c[i, kk] * wpsd[3 + kk] * c[j, kk]
                pn[6 + i, 6 + j] += s * dt
            pn[9 + i, 9 + i] += wpsd[6 + i] * dt
            pn[12 + i, 12 + i] += wpsd[9 + i] * dt
        trace = 0.0
        dmin = pn[0, 0]
        for i in range(15):
            for j in range(i, 15):
                s = 0.5 * (pn[i, j] + pn[j, i])
                P[i, j] = s
                P[j, i] = s
            trace += P[i, i]
            if P[i, i] < dmin:
                dmin = P[i, i]
        if dmin < -1e-9 * max(trace, 0.0):
            raise NumericalHealthError("covariance lost positive semidefiniteness")

        if stat[k] and (use_zvu or use_zar):
            m = 0
            if use_zvu:
                for i in range(3):
                    sel[m] = 3 + i
                    dz[m] = v[i]
                    innov_v[k, i] = v[i]
                    m += 1
            if use_zar:
                for i in range(3):
                    sel[m] = 12 + i
                    dz[m] = wc[i]
                    innov_v[k, 3 + i] = wc[i]
                    m += 1
            row = 0
            for i in range(m):
                for j in range(m):
                    smat[i, j] = P[sel[i], sel[j]]
            if use_zvu:
                for i in range(3):
                    for j in range(3):
                        smat[i, j] += r_zvu[i, j]
                row = 3
            if use_zar:
                for i in range(3):
                    for j in range(3):
                        smat[row + i, row + j] += r_zar[i, j]
            chol_factor(smat, m)
            # K = P[:, sel] S^-1, one Cholesky solve per state row
            for i in range(15):
                for j in range(m):
                    rhs[j] = P[i, sel[j]]
                chol_solve(smat, m, rhs)
                for j in range(m):
                    kmat[i, j] = rhs[j]
            for i in range(15):
                dx[i] = 0.0
                for j in range(m):
                    dx[i] += kmat[i, j] * dz[j]
            # P <- P - K P[sel, :], symmetrized
            for i in range(15):
                for j in range(15):
                    s = 0.0
                    for kk in range(m):
                        s += kmat[i, kk] * P[sel[kk], j]
                    pn[i, j] = P[i, j] - s
            for i in range(15):
                for j in range(i, 15):
                    s = 0.5 * (pn[i, j] + pn[j, i])
                    P[i, j] = s
                    P[j, i] = s

            # closed-loop feedback
            eps0 = dx[6]
            eps1 = dx[7]
            eps2 = dx[8]
            if sqrt(eps0 * eps0 + eps1 * eps1 + eps2 * eps2) >= 0.5:
                raise ValidationError("misalignment too large for small-angle injection")
            for i in range(3):
                p[i] -= dx[i]
                v[i] -= dx[3 + i]
                ba[i] += dx[9 + i]
                bg[i] += dx[12 + i]
            # c <- (I - skew(eps)) c, then re-orthogonalize
            for j in range(3):
                a3[0, j] = c[0, j] + eps2 * c[1, j] - eps1 * c[2, j]
                a3[1, j] = -eps2 * c[0, j] + c[1, j] + eps0 * c[2, j]
                a3[2, j] = eps1 * c[0, j] - eps0 * c[1, j] + c[2, j]
            for i in range(3):
                for j in range(3):
                    c[i, j] = a3[i, j]
            reorth3(c, b3, d3)

        if k % REORTH_EVERY == 0:
            reorth3(c, b3, d3)

        trace = 0.0
        for i in range(15):
            trace += P[i, i]
        for i in range(3):
            pos_v[k, i] = p[i]
            vel_v[k, i] = v[i]
            ba_v[k, i] = ba[i]
            bg_v[k, i] = bg[i]
            for j in range(3):
                att_v[k, i, j] = c[i, j]
        ptr_v[k] = trace

    filt.P = P_arr
    filt.dx = np.zeros(15)
    return {
        "p": positions,
        "v": velocities,
        "c": attitudes,
        "ptrace": ptrace,
        "innov": innov,
        "ba": ba_hist,
        "bg": bg_hist,
    }
