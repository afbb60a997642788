"""Pure numpy implementations of the trajectory kernels.

These are the reference versions; ``_kernels.pyx`` must agree with them to
rounding.  Both expect ``xs`` sorted ascending and areas sorted by
``dra_lo``.
"""
import numpy as np

BACKEND = "python"


def bias_loss_sweep(xs, dra_lo, dra_hi, decay, threshold):
    """Total bias-loss ratio and index of the strongest area at each ``x``.

    Returns ``(total, dominant)``; ``dominant`` is -1 where no area reaches.
    """
    xs = np.asarray(xs, dtype=np.float64)
    lo = np.asarray(dra_lo, dtype=np.float64)
    hi = np.asarray(dra_hi, dtype=np.float64)
    n = xs.shape[0]
    total = np.zeros(n)
    dominant = np.full(n, -1, dtype=np.int64)
    if lo.shape[0] == 0:
        return total, dominant
    best = np.zeros(n)
    for i in range(lo.shape[0]):
        d = np.where(xs < lo[i], lo[i] - xs, np.where(xs > hi[i], xs - hi[i], 0.0))
        r = np.exp(-decay * d * d)
        r = np.where(r >= threshold, r, 0.0)
        total += r
        better = r > best
        dominant[better] = i
        best = np.where(better, r, best)
    np.minimum(total, 1.0, out=total)
    return total, dominant


def _gain_db(dx, dy, dz, az0, el0, gmax, bw, am, sla):
    az = np.degrees(np.arctan2(dy, dx)) - az0
    az = (az + 180.0) % 360.0 - 180.0
    el = np.degrees(np.arctan2(dz, np.hypot(dx, dy))) - el0
    a_h = np.minimum(12.0 * (az / bw) ** 2, am)
    a_v = np.minimum(12.0 * (el / bw) ** 2, sla)
    return gmax - np.minimum(a_h + a_v, am)


def reflex_profile(xs, bias, dominant, panel_lo, panel_hi, panel_y,
                   qx, qy, qz, rx_z, tx_power,
                   pl_intercept, pl_exponent, rl_ratio,
                   tx_az, tx_el, tx_gmax, tx_bw, tx_am, tx_sla,
                   rx_az, rx_el, rx_gmax, rx_bw, rx_am, rx_sla):
    """Reflected power at road positions ``xs`` through unrotated panels at ``y = panel_y``.

    The specular point is clamped onto the dominant panel's extent.
    """
    xs = np.asarray(xs, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    dominant = np.asarray(dominant, dtype=np.int64)
    out = np.zeros(xs.shape[0])
    mask = (dominant >= 0) & (bias > 0.0)
    if not mask.any():
        return out
    x = xs[mask]
    d = dominant[mask]
    my = 2.0 * panel_y - qy
    s = (panel_y - my) / (0.0 - my)
    px = qx + s * (x - qx)
    px = np.clip(px, np.asarray(panel_lo)[d], np.asarray(panel_hi)[d])
    d1h = np.hypot(px - qx, panel_y - qy)
    d2h = np.hypot(x - px, panel_y)
    pz = qz + (rx_z - qz) * d1h / (d1h + d2h)
    d1 = np.sqrt(d1h ** 2 + (pz - qz) ** 2)
    d2 = np.sqrt(d2h ** 2 + (rx_z - pz) ** 2)
    pl_db = pl_intercept + 10.0 * pl_exponent * np.log10(d1 + d2)
    g_tx = _gain_db(px - qx, panel_y - qy, pz - qz, tx_az, tx_el, tx_gmax, tx_bw, tx_am, tx_sla)
    g_rx = _gain_db(px - x, np.full_like(x, panel_y), pz - rx_z, rx_az, rx_el, rx_gmax, rx_bw, rx_am, rx_sla)
    out[mask] = tx_power * rl_ratio * bias[mask] * 10.0 ** ((g_tx + g_rx - pl_db) / 10.0)
    return out
