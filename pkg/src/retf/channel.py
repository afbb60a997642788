"""Cluster-ray fast fading, the joint direct/reflex channel and rank adaptation.

The fading generator is a reduced version of the 3GPP cluster model:
exponential delay profile, log-normal cluster shadowing, and Gaussian
angular spread around the line-of-sight departure and arrival angles.
Delays are placed on distinct taps of the subcarrier sampling grid so the
FFT to the frequency domain is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidScenarioError
from .geometry import Transmitter, Vec3
from .propagation import AntennaPattern, LossModel, antenna_gain, path_loss_ratio, reflex_path_loss_ratio


@dataclass(frozen=True)
class FadingConfig:
    num_clusters: int = 4
    rays_per_cluster: int = 4
    delay_spread: float = 100e-9
    angle_spread_deg: float = 10.0
    num_subcarriers: int = 32
    subcarrier_spacing_hz: float = 625e3
    cluster_shadowing_db: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.num_subcarriers < 1:
            raise InvalidScenarioError("need at least one subcarrier")
        if not self.delay_spread > 0:
            raise InvalidScenarioError("delay spread must be positive")
        if self.num_clusters < 1 or self.rays_per_cluster < 1:
            raise InvalidScenarioError("need at least one cluster and one ray")
        if self.num_rays > self.num_subcarriers:
            raise InvalidScenarioError("more rays than delay taps on the subcarrier grid")

    @property
    def num_rays(self) -> int:
        return self.num_clusters * self.rays_per_cluster

    @property
    def sample_period(self) -> float:
        return 1.0 / (self.num_subcarriers * self.subcarrier_spacing_hz)

    def subcarrier_freqs(self) -> np.ndarray:
        return np.arange(self.num_subcarriers) * self.subcarrier_spacing_hz


@dataclass(frozen=True)
class RaySet:
    taps: np.ndarray       # (n_ray,) integer delay taps
    delays: np.ndarray     # (n_ray,) seconds
    powers: np.ndarray     # (n_ray,) sums to one
    aod_deg: np.ndarray
    aoa_deg: np.ndarray
    coeffs: np.ndarray     # (n_ray, n_rx, n_tx)


def steering_vector(n: int, angle_deg) -> np.ndarray:
    """Half-wavelength ULA response; angle measured from the array boresight."""
    k = np.arange(n)
    ang = np.radians(np.atleast_1d(np.asarray(angle_deg, dtype=float)))
    v = np.exp(1j * np.pi * np.outer(np.sin(ang), k))
    return v[0] if np.ndim(angle_deg) == 0 else v


def link_rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(t) for t in tags]]))


def _assign_taps(cluster_taps: np.ndarray, rays_per_cluster: int, n_taps: int) -> np.ndarray:
    taken = np.zeros(n_taps, dtype=bool)
    out = []
    for base in cluster_taps:
        for m in range(rays_per_cluster):
            t = int(base) + m
            while taken[t % n_taps]:
                t += 1
            t %= n_taps
            taken[t] = True
            out.append(t)
    return np.array(out, dtype=np.int64)


def generate_cir(aod_deg: float, aoa_deg: float, n_tx: int, n_rx: int, cfg: FadingConfig,
                 rng: np.random.Generator) -> RaySet:
    """Rays of one link, total mean power normalised to one.

    The first cluster has zero delay and its first ray carries zero phase,
    so with no angular spread and a single ray the result is the plain
    line-of-sight outer product of steering vectors.
    """
    nc, rpc = cfg.num_clusters, cfg.rays_per_cluster
    tau = -cfg.delay_spread * np.log(rng.uniform(1e-12, 1.0, nc))
    tau -= tau.min()
    tau.sort()
    shadow = 10.0 ** (-rng.normal(0.0, cfg.cluster_shadowing_db, nc) / 10.0)
    shadow[0] = 1.0
    pc = np.exp(-tau / cfg.delay_spread) * shadow
    taps = _assign_taps(np.round(tau / cfg.sample_period).astype(np.int64), rpc, cfg.num_subcarriers)
    powers = np.repeat(pc / rpc, rpc)
    powers /= powers.sum()
    n = nc * rpc
    aod = aod_deg + cfg.angle_spread_deg * rng.standard_normal(n)
    aoa = aoa_deg + cfg.angle_spread_deg * rng.standard_normal(n)
    phases = rng.uniform(0.0, 2.0 * np.pi, n)
    phases[0] = 0.0
    a_rx = steering_vector(n_rx, aoa)
    a_tx = steering_vector(n_tx, aod)
    amp = np.sqrt(powers) * np.exp(1j * phases)
    coeffs = amp[:, None, None] * a_rx[:, :, None] * np.conj(a_tx)[:, None, :]
    return RaySet(taps, taps * cfg.sample_period, powers, aod, aoa, coeffs)


def to_frequency(rays: RaySet, cfg: FadingConfig) -> np.ndarray:
    """Per-subcarrier channel matrices, shape ``(N_B, n_rx, n_tx)``."""
    _, n_rx, n_tx = rays.coeffs.shape
    taps = np.zeros((cfg.num_subcarriers, n_rx, n_tx), dtype=complex)
    np.add.at(taps, rays.taps, rays.coeffs)
    return np.fft.fft(taps, axis=0)


def frequency_response_direct(rays: RaySet, cfg: FadingConfig) -> np.ndarray:
    """Slow per-ray phasor sum; used to cross-check :func:`to_frequency`."""
    f = cfg.subcarrier_freqs()
    ph = np.exp(-2j * np.pi * np.outer(f, rays.delays))
    return np.einsum("vu,urt->vrt", ph, rays.coeffs)


@dataclass(frozen=True)
class JointChannel:
    direct: np.ndarray                # (N_B, N_r, N_t)
    reflex: np.ndarray | None = None  # (N_B, N_r, N_t)
    power_factor: float = 0.0

    def __post_init__(self):
        if self.reflex is not None and self.reflex.shape != self.direct.shape:
            raise InvalidScenarioError("direct and reflex channels must share dimensions")
        if self.power_factor < 0:
            raise InvalidScenarioError("power factor must be non-negative")

    @property
    def has_reflex(self) -> bool:
        return self.reflex is not None and self.power_factor > 0.0

    def stacked(self) -> np.ndarray:
        if not self.has_reflex:
            return self.direct
        return np.concatenate([self.direct, math.sqrt(self.power_factor) * self.reflex], axis=1)


def gram(h: np.ndarray) -> np.ndarray:
    """Subcarrier-averaged ``H^H H``."""
    return np.einsum("vri,vrj->ij", h.conj(), h) / h.shape[0]


def covariance(joint: JointChannel) -> np.ndarray:
    cov = gram(joint.direct)
    if joint.has_reflex:
        cov = cov + joint.power_factor * gram(joint.reflex)
    return 0.5 * (cov + cov.conj().T)


def rank_from_eigenvalues(eig: np.ndarray, threshold: float, reference: float | None = None,
                          max_rank: int | None = None) -> int:
    """Eigenvalues at or above ``threshold * reference``, at least one and at most ``max_rank``."""
    ref = eig[0] if reference is None else reference
    if ref <= 0:
        raise InvalidScenarioError("all-zero channel has no usable layer")
    r = max(1, int(np.count_nonzero(eig >= threshold * ref)))
    return r if max_rank is None else min(r, max_rank)


def rank_adapt(joint: JointChannel, eigen_threshold: float = 0.01,
               reference: float | None = None) -> tuple[int, np.ndarray]:
    """Layer count and descending eigenvalues of the average covariance.

    A layer counts when its eigenvalue reaches ``eigen_threshold`` times
    ``reference`` (default: the largest eigenvalue of this covariance).
    Passing the direct-only largest eigenvalue as ``reference`` keeps the
    absolute threshold fixed when the reflex block is added.  The count never
    exceeds the receive antennas in use: ``N_r``, or ``2 N_r`` with the reflex panel.
    """
    eig = np.linalg.eigvalsh(covariance(joint))[::-1].copy()
    if eig[0] <= 0:
        raise InvalidScenarioError("all-zero channel has no usable layer")
    return rank_from_eigenvalues(eig, eigen_threshold, reference, joint.stacked().shape[1]), eig


def power_factor(tv_pos: Vec3, bs: Transmitter, p_star: Vec3, bias: float, model: LossModel,
                 bs_pattern: AntennaPattern, tv_pattern: AntennaPattern,
                 pap: Vec3, sap: Vec3) -> float:
    """Reflex-to-direct received power ratio at the vehicle.

    Zero when the vehicle sits outside every active reflection area.
    """
    if bias <= 0.0:
        return 0.0
    g_dir = antenna_gain(bs.position, tv_pos, bs.orientation, bs_pattern) * \
        antenna_gain(tv_pos, bs.position, pap, tv_pattern)
    g_ref = antenna_gain(bs.position, p_star, bs.orientation, bs_pattern) * \
        antenna_gain(tv_pos, p_star, sap, tv_pattern)
    num = g_ref * reflex_path_loss_ratio(bs.position, p_star, tv_pos, model) * model.reflection_ratio * bias
    den = g_dir * path_loss_ratio(bs.position, tv_pos, model)
    return num / den


def azimuth_offset(src: Vec3, dst: Vec3, boresight: Vec3) -> float:
    az = math.degrees(math.atan2(dst.y - src.y, dst.x - src.x) - math.atan2(boresight.y, boresight.x))
    return (az + 180.0) % 360.0 - 180.0


def link_channel(tx_pos: Vec3, tx_boresight: Vec3, rx_pos: Vec3, rx_boresight: Vec3,
                 n_tx: int, n_rx: int, cfg: FadingConfig, rng: np.random.Generator,
                 via: Vec3 | None = None) -> np.ndarray:
    """Frequency-domain channel of one link; ``via`` is the reflecting point for reflex links."""
    hop = rx_pos if via is None else via
    aod = azimuth_offset(tx_pos, hop, tx_boresight)
    aoa = azimuth_offset(rx_pos, tx_pos if via is None else via, rx_boresight)
    return to_frequency(generate_cir(aod, aoa, n_tx, n_rx, cfg, rng), cfg)


def combine_reflex(channels: Sequence[np.ndarray], weights: Sequence[float]) -> tuple[np.ndarray, float]:
    """Merge several reflex contributions into one unit-power block.

    Returns the block and the total weight; each contribution enters in
    proportion to its received power.
    """
    total = float(sum(weights))
    if total <= 0.0:
        return np.zeros_like(channels[0]), 0.0
    h = sum(math.sqrt(w / total) * c for w, c in zip(weights, channels))
    return h, total
