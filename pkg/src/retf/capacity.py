"""TV and SU capacities, and the throughput ratios the group optimiser maximises.

Two capacity models are available.  ``geometry`` uses geometrical SINRs only.
``csi`` draws per-step fading channels and adapts the layer count from the
joint covariance; for sensitive users it integrates the exact reflected
interference over time instead of using the encounter-point estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .channel import (FadingConfig, JointChannel, generate_cir, gram, link_channel, link_rng, rank_adapt,
                      to_frequency)
from .errors import InvalidScenarioError
from .geometry import EffectivePanel, ReflectionArea, SensitiveUser, Vec3, reflecting_point, reflection_area
from .propagation import (OMNI, bias_loss_ratio, direct_power, direct_power_array, pattern_params,
                          received_power, reflex_power, reflex_power_array)
from .rpp import (VirtualGroup, VirtualGroupSet, effective_panel, interference_duration, split_comoving)
from .scenario import CapacityParams, Scenario

__all__ = [
    "CapacityParams", "ThroughputRatios", "PhiEvaluator", "SuFading", "geometry_capacity",
    "geometry_capacity_tv", "csi_capacity", "csi_capacity_tv", "su_capacities", "su_fading",
    "su_series", "throughput_ratios", "tv_link_budget", "interference_duration",
]

# tags separating the independent random streams drawn from one seed
DIRECT_TAG, REFLEX_TAG, AVRG_TAG, SU_TAG = 1, 2, 3, 7
# cache per-step covariances only below this many bytes; regenerate otherwise
COV_CACHE_BYTES = 256 * 2 ** 20


@dataclass(frozen=True)
class ThroughputRatios:
    tv_ratio: float
    su_ratio: float
    joint: float


def _check_floor(interference) -> None:
    if np.any(np.asarray(interference) <= 0.0):
        raise InvalidScenarioError(
            "interference-plus-noise is zero; configure a noise floor (capacity.noise_floor_w)")


def shannon(bandwidth: float, signal, interference):
    _check_floor(interference)
    return bandwidth * np.log2(1.0 + np.asarray(signal) / np.asarray(interference))


def geometry_capacity(s0p, i_pap, s0s, i_sap, params: CapacityParams):
    """``(C_org, C_enh)`` from geometrical PAP and SAP SINRs."""
    c_org = params.num_rx * shannon(params.bandwidth_hz, s0p, i_pap)
    c_enh = c_org + params.num_rx * shannon(params.bandwidth_hz, s0s, i_sap)
    return c_org, c_enh


def csi_capacity(signal, eig, rank, interference, bandwidth: float):
    """Uniform power over the ``rank`` strongest layers.

    Works on a single eigenvalue vector or on a stack of them (last axis).
    """
    _check_floor(interference)
    eig = np.asarray(eig, dtype=float)
    rank = np.asarray(rank)
    r = np.arange(eig.shape[-1])
    used = r < rank[..., None]
    snr = np.asarray(signal)[..., None] * np.clip(eig, 0.0, None) / (rank[..., None] * np.asarray(interference)[..., None])
    return bandwidth * np.sum(np.where(used, np.log2(1.0 + snr), 0.0), axis=-1)


def csi_capacity_tv(joint: JointChannel, signal: float, interference: float, params: CapacityParams,
                    eigen_threshold: float = 0.01, reference: float | None = None) -> tuple[float, int]:
    """Capacity and adapted layer count of one joint channel snapshot."""
    rank, eig = rank_adapt(joint, eigen_threshold, reference)
    return float(csi_capacity(signal, eig, rank, interference, params.bandwidth_hz)), rank


def tv_link_budget(sc: Scenario, xs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Serving power on the PAP and interference-plus-noise on the PAP and SAP."""
    xs = np.asarray(xs, dtype=float)
    z = sc.tv_height
    s0p = direct_power_array(sc.bs, xs, 0.0, z, sc.pap, sc.loss, sc.bs_pattern, sc.tv_pattern)
    i_pap = np.full_like(xs, sc.capacity.noise_floor_w)
    i_sap = np.full_like(xs, sc.capacity.noise_floor_w)
    for tx in sc.interferers:
        i_pap = i_pap + direct_power_array(tx, xs, 0.0, z, sc.pap, sc.loss, sc.bs_pattern, sc.tv_pattern)
        i_sap = i_sap + direct_power_array(tx, xs, 0.0, z, sc.sap, sc.loss, sc.bs_pattern, sc.tv_pattern)
    return s0p, i_pap, i_sap


def _dominant(areas: Sequence[ReflectionArea], x: float) -> int:
    best, idx = 0.0, -1
    for i, a in enumerate(areas):
        r = a.ratio(x)
        if r > best:
            best, idx = r, i
    return idx


def tv_reflex_power(x: float, sc: Scenario, groups: VirtualGroupSet) -> float:
    """Reflex power on the SAP at road position ``x`` (scalar reference path)."""
    areas = sc.areas(groups)
    bias = bias_loss_ratio(x, [(a, g.active) for a, g in zip(areas, groups)])
    if bias == 0.0:
        return 0.0
    d = _dominant(areas, x)
    tv = sc.tv_position(x)
    p = reflecting_point(sc.bs.position, tv, effective_panel(groups[d], sc.array)).point
    return reflex_power(sc.bs, tv, sc.sap, p, bias, sc.loss, sc.bs_pattern, sc.tv_pattern)


def geometry_capacity_tv(x: float, sc: Scenario, groups: VirtualGroupSet) -> tuple[float, float]:
    if not 0.0 <= x <= sc.road_length:
        raise InvalidScenarioError(f"x = {x:g} lies off the road [0, {sc.road_length:g}]")
    tv = sc.tv_position(x)
    s0p = received_power(sc.bs, (tv, sc.pap), sc.loss, sc.bs_pattern, rx_pattern=sc.tv_pattern)
    i_pap = i_sap = sc.capacity.noise_floor_w
    for tx in sc.interferers:
        i_pap += received_power(tx, (tv, sc.pap), sc.loss, sc.bs_pattern, rx_pattern=sc.tv_pattern)
        i_sap += received_power(tx, (tv, sc.sap), sc.loss, sc.bs_pattern, rx_pattern=sc.tv_pattern)
    c_org, c_enh = geometry_capacity(s0p, i_pap, tv_reflex_power(x, sc, groups), i_sap, sc.capacity)
    return float(c_org), float(c_enh)


# ---------------------------------------------------------------- sensitive users

@dataclass(frozen=True)
class SuFading:
    """Per-subcarrier power gains (mean one) of a user's serving, BS and reflex links."""

    serving: np.ndarray
    bs: np.ndarray
    reflex: np.ndarray


def _siso_gain(cfg: FadingConfig, rng: np.random.Generator) -> np.ndarray:
    h = to_frequency(generate_cir(0.0, 0.0, 1, 1, cfg, rng), cfg)[:, 0, 0]
    return np.abs(h) ** 2


def su_fading(sc: Scenario, j: int) -> SuFading:
    return SuFading(*(_siso_gain(sc.fading, link_rng(sc.seed, SU_TAG, j, k)) for k in range(3)))


def su_track(sc: Scenario, su: SensitiveUser, times=None) -> np.ndarray:
    """User x positions at the trajectory time steps."""
    t = sc.times if times is None else np.asarray(times, dtype=float)
    return su.encounter_x + su.speed * (t - su.encounter_x / sc.tv_speed)


def su_direct_powers(sc: Scenario, su: SensitiveUser, xs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Serving power, BS power and other-transmitter power at user positions ``xs``."""
    xs = np.asarray(xs, dtype=float)
    serving = bs = None
    other = np.full_like(xs, sc.capacity.noise_floor_w)
    for tx in sc.transmitters:
        p = direct_power_array(tx, xs, su.lateral_y, su.height, None, sc.loss, sc.bs_pattern)
        if tx.index == 0:
            bs = p
        elif tx.index == su.serving_index:
            serving = p
        else:
            other = other + p
    return serving, bs, other


def _su_rate(bandwidth, serving, bs, reflex, other, fading: SuFading | None):
    if fading is None:
        return shannon(bandwidth, serving, bs + reflex + other)
    serving, bs, reflex, other = (np.asarray(a, float)[..., None] for a in (serving, bs, reflex, other))
    den = bs * fading.bs + reflex * fading.reflex + other
    _check_floor(den)
    return bandwidth * np.mean(np.log2(1.0 + serving * fading.serving / den), axis=-1)


def su_reflex_estimate(sc: Scenario, su: SensitiveUser, x: float, areas: Sequence[ReflectionArea],
                       panels: Sequence[EffectivePanel]) -> float:
    """Reflected BS power at the user, estimated from the vehicle's reflection geometry at ``x``."""
    bias = min(sum(a.ratio(x) for a in areas), 1.0)
    if bias == 0.0:
        return 0.0
    d = _dominant(areas, x)
    p = reflecting_point(sc.bs.position, sc.tv_position(x), panels[d]).point
    return sc.su_power_factor * reflex_power(sc.bs, su.position_at(x), None, p, bias, sc.loss, sc.bs_pattern)


def su_capacities(su: SensitiveUser, x: float, sc: Scenario, groups: VirtualGroupSet,
                  indices: Sequence[int] | None = None) -> tuple[float, float]:
    """Normal and interfered user capacity with the vehicle at ``x`` (geometry estimate).

    ``indices`` restricts the interfering groups; by default every group counts.
    """
    idx = range(len(groups)) if indices is None else indices
    areas = [sc.area(groups[i]) for i in idx]
    panels = [effective_panel(groups[i], sc.array) for i in idx]
    pos = su.position_at(x)
    s = [direct_power(tx, pos, None, sc.loss, sc.bs_pattern) for tx in sc.transmitters]
    serving, bs = s[su.serving_index], s[0]
    other = sc.capacity.noise_floor_w + sum(p for h, p in enumerate(s) if h not in (0, su.serving_index))
    r0 = su_reflex_estimate(sc, su, x, areas, panels)
    w = sc.capacity.bandwidth_hz
    return float(shannon(w, serving, bs + other)), float(shannon(w, serving, bs + r0 + other))


def reflector_power(sc: Scenario, panels: Sequence[EffectivePanel], masks: Sequence[np.ndarray] | None,
                    rx_x, rx_y, rx_z, rx_orient: Vec3 | None = None, rx_pattern=OMNI,
                    receiver_y: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Combined reflex power of a set of panels at receiver points.

    Bias ratios of the panels add up (capped at one) and the strongest panel
    provides the specular point, as for a single effective panel.  ``masks``
    switch panels on per point.  Returns ``(power, dominant)``; ``dominant``
    is -1 where nothing reaches.
    """
    rx_x = np.asarray(rx_x, dtype=float)
    ry = float(np.mean(rx_y)) if receiver_y is None else receiver_y
    n = rx_x.shape[0]
    ratios = np.zeros((n, len(panels)))
    for i, panel in enumerate(panels):
        try:
            area = _panel_area(sc, panel, ry)
        except InvalidScenarioError:
            continue
        r = area.ratio_array(rx_x)
        ratios[:, i] = r if masks is None else np.where(masks[i], r, 0.0)
    total = np.minimum(ratios.sum(axis=1), 1.0)
    dom = np.where(total > 0.0, np.argmax(ratios, axis=1), -1) if panels else np.full(n, -1)
    power = np.zeros(n)
    rx_y = np.broadcast_to(np.asarray(rx_y, float), rx_x.shape)
    rx_z = np.broadcast_to(np.asarray(rx_z, float), rx_x.shape)
    for i, panel in enumerate(panels):
        sel = dom == i
        if np.any(sel):
            power[sel] = reflex_power_array(sc.bs, panel, rx_x[sel], rx_y[sel], rx_z[sel], total[sel],
                                            rx_orient, sc.loss, sc.bs_pattern, rx_pattern)
    return power, dom


def _panel_area(sc: Scenario, panel: EffectivePanel, receiver_y: float) -> ReflectionArea:
    return reflection_area(sc.bs.position, panel, sc.loss.decay, sc.loss.threshold, receiver_y)


def su_series(sc: Scenario, su: SensitiveUser, reflector_sets, fading: SuFading | None = None,
              steps: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Normal and interfered user capacity at the trajectory steps.

    ``reflector_sets`` is a list of ``(panels, masks)``; each set combines its
    panels' bias ratios, and the sets' powers add.  Masks are indexed by
    trajectory step and say when a panel reflects.
    """
    steps = np.arange(sc.n_steps) if steps is None else np.asarray(steps)
    xs = su_track(sc, su, sc.times[steps])
    serving, bs, other = su_direct_powers(sc, su, xs)
    reflex = np.zeros_like(xs)
    for panels, masks in reflector_sets:
        m = None if masks is None else [np.asarray(mk)[steps] for mk in masks]
        p, _ = reflector_power(sc, panels, m, xs, su.lateral_y, su.height, receiver_y=su.lateral_y)
        reflex += p
    w = sc.capacity.bandwidth_hz
    zero = np.zeros_like(xs)
    return _su_rate(w, serving, bs, zero, other, fading), _su_rate(w, serving, bs, reflex, other, fading)


# ---------------------------------------------------------------- objective

def _components(areas: Sequence[ReflectionArea]) -> list[list[int]]:
    """Runs of groups whose reflection areas overlap, in road order."""
    comps: list[list[int]] = []
    reach = -math.inf
    for i, a in enumerate(areas):
        if comps and a.ra_start <= reach:
            comps[-1].append(i)
        else:
            comps.append([i])
        reach = max(reach, a.ra_end)
    return comps


class PhiEvaluator:
    """Evaluates Φ for candidate group sets of one scenario.

    Everything independent of the grouping (direct-link powers, the original
    capacity, channel draws) is computed once.  The enhancement of each run of
    overlapping reflection areas is cached by the groups' bounds, so group sets
    that share groups share work.
    """

    def __init__(self, sc: Scenario, mode: str | None = None, zeta: float | None = None):
        self.sc = sc
        self.mode = sc.effective_mode() if mode is None else mode
        if self.mode == "hybrid":
            self.mode = "csi" if sc.csi_fresh else "geometry"
        if self.mode not in ("geometry", "csi"):
            raise InvalidScenarioError(f"unknown capacity mode {self.mode!r}")
        self.zeta = sc.capacity.ilf if zeta is None else float(zeta)
        self.xs = sc.positions
        self.dt = sc.dt
        self.s0p, self.i_pap, self.i_sap = tv_link_budget(sc, self.xs)
        _check_floor(self.i_pap)
        _check_floor(self.i_sap)
        self._bs_params = pattern_params(sc.bs_pattern, sc.bs.orientation)
        self._sap_params = pattern_params(sc.tv_pattern, sc.sap)
        self._cov_d = self._cov_r = None
        if self.mode == "csi":
            self._init_csi()
        else:
            w, nr = sc.capacity.bandwidth_hz, sc.capacity.num_rx
            self.c_org = nr * shannon(w, self.s0p, self.i_pap)
            self.rank_org = np.full(sc.n_steps, nr, dtype=np.int64)
        self.org_integral = float(np.sum(self.c_org) * self.dt)
        self._comp_cache: dict[tuple, float] = {}
        self._area_cache: dict[tuple[int, int], ReflectionArea] = {}
        self._su_cache: dict[tuple, float] = {}
        self._phi_cache: dict[int, ThroughputRatios] = {}
        self._su_den: list[float] | None = None
        self._su_fading = [su_fading(sc, j) for j in range(len(sc.sus))] if self.mode == "csi" else None

    # -- channels

    def reflex_via(self, xs) -> np.ndarray:
        """Unclamped specular x on the panel line for vehicle positions ``xs``."""
        q = self.sc.bs.position
        d0 = self.sc.array.standoff
        my = 2.0 * d0 - q.y
        return q.x + (d0 - my) / (0.0 - my) * (np.asarray(xs) - q.x)

    def step_channels(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Direct and (unit-power) reflex channel at step ``k``; deterministic in the seed."""
        sc = self.sc
        cap, cfg = sc.capacity, sc.fading
        tv = sc.tv_position(float(self.xs[k]))
        bs = sc.bs
        hd = link_channel(bs.position, bs.orientation, tv, sc.pap, cap.num_tx, cap.num_rx, cfg,
                          link_rng(sc.seed, DIRECT_TAG, k))
        via = Vec3(float(self.reflex_via(self.xs[k])), sc.array.standoff, sc.array.height)
        hr = link_channel(bs.position, bs.orientation, tv, sc.sap, cap.num_tx, cap.num_rx, cfg,
                          link_rng(sc.seed, REFLEX_TAG, k), via=via)
        return hd, hr

    def covariances(self, idx) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(idx, dtype=np.int64)
        if self._cov_d is not None:
            return self._cov_d[idx], self._cov_r[idx]
        nt = self.sc.capacity.num_tx
        cd = np.empty((idx.size, nt, nt), dtype=complex)
        cr = np.empty_like(cd)
        for n, k in enumerate(idx):
            hd, hr = self.step_channels(int(k))
            cd[n], cr[n] = gram(hd), gram(hr)
        return _herm(cd), _herm(cr)

    def _init_csi(self) -> None:
        sc = self.sc
        n, nt = sc.n_steps, sc.capacity.num_tx
        store = 2 * n * nt * nt * 16 <= COV_CACHE_BYTES
        lam = np.empty(n)
        eig_org = np.empty((n, nt))
        chunk = 512
        cds, crs = [], []
        for a in range(0, n, chunk):
            idx = np.arange(a, min(a + chunk, n))
            cd, cr = self.covariances(idx)
            e = np.linalg.eigvalsh(cd)[:, ::-1]
            eig_org[idx] = e
            lam[idx] = e[:, 0]
            if store:
                cds.append(cd)
                crs.append(cr)
        if np.any(lam <= 0.0):
            raise InvalidScenarioError("all-zero direct channel has no usable layer")
        if store:
            self._cov_d, self._cov_r = np.concatenate(cds), np.concatenate(crs)
        self.lam_ref = lam
        self.eig_org = eig_org
        self.rank_org = self._ranks(eig_org, lam, sc.capacity.num_rx)
        self.c_org = csi_capacity(self.s0p, eig_org, self.rank_org, self.i_pap, sc.capacity.bandwidth_hz)

    def _ranks(self, eig: np.ndarray, ref: np.ndarray, max_rank: int) -> np.ndarray:
        thr = self.sc.eigen_threshold * ref
        return np.clip(np.count_nonzero(eig >= thr[:, None], axis=1), 1, max_rank)

    # -- TV side

    def area(self, g: VirtualGroup) -> ReflectionArea:
        key = g.bounds
        a = self._area_cache.get(key)
        if a is None:
            a = self._area_cache[key] = self.sc.area(g)
        return a

    def step_range(self, lo: float, hi: float) -> np.ndarray:
        a = int(np.searchsorted(self.xs, lo, side="left"))
        b = int(np.searchsorted(self.xs, hi, side="right"))
        return np.arange(a, b)

    def reflex_profile(self, groups: Sequence[VirtualGroup], idx: np.ndarray) -> np.ndarray:
        """SAP reflex power of the unrotated ``groups`` at steps ``idx``."""
        sc = self.sc
        if not groups or idx.size == 0:
            return np.zeros(idx.size)
        areas = [self.area(g) for g in groups]
        xs = self.xs[idx]
        bias, dom = kernels.bias_loss_sweep(xs, [a.dra_start for a in areas], [a.dra_end for a in areas],
                                            sc.loss.decay, sc.loss.threshold)
        panels = [effective_panel(g, sc.array) for g in groups]
        q = sc.bs.position
        return kernels.reflex_profile(
            xs, bias, dom, [p.start.x for p in panels], [p.end.x for p in panels], sc.array.standoff,
            q.x, q.y, q.z, sc.tv_height, sc.bs.tx_power, sc.loss.pl_intercept_db, sc.loss.pl_exponent,
            sc.loss.reflection_ratio, *self._bs_params, *self._sap_params)

    def enhanced(self, idx: np.ndarray, s0s: np.ndarray, reflex_cov: np.ndarray | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
        """Enhanced capacity and rank at steps ``idx`` given the total SAP reflex power.

        ``reflex_cov`` overrides the per-step unit-power reflex covariance
        (used when several panels contribute rays).
        """
        sc = self.sc
        if self.mode == "geometry":
            c = self.c_org[idx] + sc.capacity.num_rx * shannon(sc.capacity.bandwidth_hz, s0s, self.i_sap[idx])
            rank = np.where(s0s > 0.0, 2 * sc.capacity.num_rx, sc.capacity.num_rx)
            return c, rank
        w = s0s / self.s0p[idx]
        cd, cr = self.covariances(idx)
        if reflex_cov is not None:
            cr = reflex_cov
        cov = cd + w[:, None, None] * cr
        eig = np.linalg.eigvalsh(_herm(cov))[:, ::-1]
        rank = self._ranks(eig, self.lam_ref[idx], 2 * sc.capacity.num_rx)
        c = csi_capacity(self.s0p[idx], eig, rank, self.i_pap[idx], sc.capacity.bandwidth_hz)
        # no reflex power means exactly the direct-only result
        c = np.where(s0s > 0.0, c, self.c_org[idx])
        rank = np.where(s0s > 0.0, rank, self.rank_org[idx])
        return c, rank

    def _component_gain(self, groups: Sequence[VirtualGroup]) -> float:
        key = tuple(g.bounds for g in groups)
        v = self._comp_cache.get(key)
        if v is None:
            areas = [self.area(g) for g in groups]
            idx = self.step_range(min(a.ra_start for a in areas), max(a.ra_end for a in areas))
            s0s = self.reflex_profile(groups, idx)
            c, _ = self.enhanced(idx, s0s)
            v = self._comp_cache[key] = float(np.sum(c - self.c_org[idx]) * self.dt)
        return v

    def tv_gain(self, groups: VirtualGroupSet) -> float:
        active = [g for g in groups if g.active]
        areas = [self.area(g) for g in active]
        return sum(self._component_gain([active[i] for i in comp]) for comp in _components(areas))

    def tv_ratio(self, groups: VirtualGroupSet) -> float:
        return (self.org_integral + self.tv_gain(groups)) / self.org_integral

    # -- SU side

    def su_denominators(self) -> list[float]:
        if self._su_den is None:
            sc = self.sc
            out = []
            for j, su in enumerate(sc.sus):
                serving, bs, other = su_direct_powers(sc, su, su_track(sc, su))
                f = self._su_fading[j] if self._su_fading else None
                c = _su_rate(sc.capacity.bandwidth_hz, serving, bs, np.zeros_like(bs), other, f)
                out.append(float(np.sum(c) * self.dt))
            self._su_den = out
        return self._su_den

    def su_terms(self, groups: VirtualGroupSet) -> list[float]:
        active = VirtualGroupSet(tuple(g for g in groups if g.active), groups.n_patches)
        if self.mode == "csi":
            return [self._su_term_exact(j, active) for j in range(len(self.sc.sus))]
        terms = []
        for j in range(len(self.sc.sus)):
            terms.extend(self._su_terms_estimate(j, active))
        return terms

    def _su_terms_estimate(self, j: int, groups: VirtualGroupSet) -> list[float]:
        sc = self.sc
        su = sc.sus[j]
        areas = [self.area(g) for g in groups]
        spans = [a.on_road(sc.road_length) for a in areas]
        out = []
        for part, infl in split_comoving(su, spans, sc.tv_speed):
            if not infl:
                out.append(1.0)
                continue
            key = ("est", j, tuple(groups[i].bounds for i in infl))
            v = self._su_cache.get(key)
            if v is None:
                t_int = interference_duration(part, spans, infl, sc.tv_speed)
                c_nrm, c_int = su_capacities(part, part.encounter_x, sc, groups, infl)
                v = self._su_cache[key] = 1.0 - t_int * (c_nrm - c_int) / self.su_denominators()[j]
            out.append(v)
        return out

    def _su_term_exact(self, j: int, groups: VirtualGroupSet) -> float:
        sc = self.sc
        su = sc.sus[j]
        relevant = []
        for g in groups:
            tv_area = self.area(g)
            try:
                su_area = _panel_area(sc, effective_panel(g, sc.array), su.lateral_y)
            except InvalidScenarioError:
                continue
            if _shared_time(su, tv_area.on_road(sc.road_length), su_area, sc.tv_speed) > 0.0:
                relevant.append(g)
        if not relevant:
            return 1.0
        key = ("exact", j, tuple(g.bounds for g in relevant))
        v = self._su_cache.get(key)
        if v is None:
            panels = [effective_panel(g, sc.array) for g in relevant]
            masks = [self._activity(g) for g in relevant]
            steps = np.flatnonzero(np.any(masks, axis=0))
            c_nrm, c_int = su_series(sc, su, [(panels, masks)], self._su_fading[j], steps)
            v = self._su_cache[key] = 1.0 - float(np.sum(c_nrm - c_int) * self.dt) / self.su_denominators()[j]
        return v

    def _activity(self, g: VirtualGroup) -> np.ndarray:
        """Steps during which ``g`` reflects: the vehicle is inside its area."""
        a = self.area(g)
        return (self.xs >= a.ra_start) & (self.xs <= a.ra_end)

    def su_ratio(self, groups: VirtualGroupSet) -> float:
        terms = self.su_terms(groups)
        return float(np.mean(terms)) if terms else 1.0

    # -- joint

    def evaluate(self, groups: VirtualGroupSet) -> ThroughputRatios:
        key = groups.mask() if all(g.active for g in groups) else None
        if key is not None and key in self._phi_cache:
            return self._phi_cache[key]
        tv = self.tv_ratio(groups)
        su = self.su_ratio(groups)
        out = ThroughputRatios(tv, su, tv + self.zeta * su)
        if key is not None:
            self._phi_cache[key] = out
        return out

    def phi(self, groups: VirtualGroupSet) -> float:
        return self.evaluate(groups).joint


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _shared_time(su: SensitiveUser, tv_area, su_area: ReflectionArea, v_r: float) -> float:
    """Time the vehicle spends in ``tv_area`` while the user is inside ``su_area``."""
    t_in, t_out = tv_area.ra_start / v_r, tv_area.ra_end / v_r
    if su.speed == 0.0:
        return t_out - t_in if su_area.contains(su.encounter_x) else 0.0
    tj = su.encounter_x / v_r
    a = tj + (su_area.ra_start - su.encounter_x) / su.speed
    b = tj + (su_area.ra_end - su.encounter_x) / su.speed
    return max(0.0, min(t_out, max(a, b)) - max(t_in, min(a, b)))


def throughput_ratios(sc: Scenario, groups: VirtualGroupSet, mode: str | None = None,
                      zeta: float | None = None) -> ThroughputRatios:
    return PhiEvaluator(sc, mode, zeta).evaluate(groups)
