# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernels; see ``_kernels_py`` for the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, atan2, hypot, log10, pow, fmod, M_PI

cnp.import_array()

BACKEND = "cython"


def bias_loss_sweep(xs, dra_lo, dra_hi, double decay, double threshold):
    cdef double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] lo = np.ascontiguousarray(dra_lo, dtype=np.float64)
    cdef double[::1] hi = np.ascontiguousarray(dra_hi, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], m = lo.shape[0]
    total_arr = np.zeros(n)
    dom_arr = np.full(n, -1, dtype=np.int64)
    cdef double[::1] total = total_arr
    cdef long long[::1] dom = dom_arr
    if m == 0:
        return total_arr, dom_arr
    cdef double w = sqrt(-np.log(threshold) / decay) if threshold > 0 else 1e300
    # running maximum of the area right edges, so the first candidate is monotone in x
    pmax_arr = np.maximum.accumulate(np.asarray(hi) + w)
    cdef double[::1] pmax = pmax_arr
    cdef Py_ssize_t first = 0, i, k
    cdef double xi, d, r, best, acc
    for k in range(n):
        xi = x[k]
        while first < m and pmax[first] < xi:
            first += 1
        acc = 0.0
        best = 0.0
        i = first
        while i < m and lo[i] - w <= xi:
            if xi < lo[i]:
                d = lo[i] - xi
            elif xi > hi[i]:
                d = xi - hi[i]
            else:
                d = 0.0
            r = exp(-decay * d * d)
            if r >= threshold:
                acc += r
                if r > best:
                    best = r
                    dom[k] = i
            i += 1
        total[k] = acc if acc < 1.0 else 1.0
    return total_arr, dom_arr


cdef inline double _gain_db(double dx, double dy, double dz, double az0, double el0,
                            double gmax, double bw, double am, double sla) nogil:
    cdef double az = atan2(dy, dx) * 180.0 / M_PI - az0
    az = fmod(az + 180.0, 360.0)
    if az < 0:
        az += 360.0
    az -= 180.0
    cdef double el = atan2(dz, hypot(dx, dy)) * 180.0 / M_PI - el0
    cdef double a_h = 12.0 * (az / bw) * (az / bw)
    if a_h > am:
        a_h = am
    cdef double a_v = 12.0 * (el / bw) * (el / bw)
    if a_v > sla:
        a_v = sla
    cdef double a = a_h + a_v
    if a > am:
        a = am
    return gmax - a


def reflex_profile(xs, bias, dominant, panel_lo, panel_hi, double panel_y,
                   double qx, double qy, double qz, double rx_z, double tx_power,
                   double pl_intercept, double pl_exponent, double rl_ratio,
                   double tx_az, double tx_el, double tx_gmax, double tx_bw, double tx_am, double tx_sla,
                   double rx_az, double rx_el, double rx_gmax, double rx_bw, double rx_am, double rx_sla):
    cdef double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(bias, dtype=np.float64)
    cdef long long[::1] dom = np.ascontiguousarray(dominant, dtype=np.int64)
    cdef double[::1] plo = np.ascontiguousarray(panel_lo, dtype=np.float64)
    cdef double[::1] phi = np.ascontiguousarray(panel_hi, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], k
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef double my = 2.0 * panel_y - qy
    cdef double s = (panel_y - my) / (0.0 - my)
    cdef double px, d1h, d2h, pz, d1, d2, pl_db, g_tx, g_rx, xk
    cdef long long d
    with nogil:
        for k in range(n):
            d = dom[k]
            if d < 0 or b[k] <= 0.0:
                continue
            xk = x[k]
            px = qx + s * (xk - qx)
            if px < plo[d]:
                px = plo[d]
            elif px > phi[d]:
                px = phi[d]
            d1h = hypot(px - qx, panel_y - qy)
            d2h = hypot(xk - px, panel_y)
            pz = qz + (rx_z - qz) * d1h / (d1h + d2h)
            d1 = sqrt(d1h * d1h + (pz - qz) * (pz - qz))
            d2 = sqrt(d2h * d2h + (rx_z - pz) * (rx_z - pz))
            pl_db = pl_intercept + 10.0 * pl_exponent * log10(d1 + d2)
            g_tx = _gain_db(px - qx, panel_y - qy, pz - qz, tx_az, tx_el, tx_gmax, tx_bw, tx_am, tx_sla)
            g_rx = _gain_db(px - xk, panel_y, pz - rx_z, rx_az, rx_el, rx_gmax, rx_bw, rx_am, rx_sla)
            out[k] = tx_power * rl_ratio * b[k] * pow(10.0, (g_tx + g_rx - pl_db) / 10.0)
    return out_arr
