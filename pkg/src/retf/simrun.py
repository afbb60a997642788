"""Scenario files, the simulation loop, parameter sweeps and result files."""
from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence, TextIO

import numpy as np
import yaml

from . import __version__, kernels
from .capacity import AVRG_TAG, PhiEvaluator, su_fading, su_series, su_track
from .channel import FadingConfig, combine_reflex, gram, link_channel, link_rng
from .dgv import gssa
from .errors import ConfigError, ConstraintViolation, InvalidScenarioError
from .geometry import SensitiveUser, Transmitter, Vec3, region_of
from .propagation import AntennaPattern, LossModel
from .rct import RotationPlan, assist_profile, entry_panels, plan_for, pre_rotation_slack
from .rpp import RppArray, VirtualGroupSet, effective_panel, ssm_schedule
from .scenario import MODES, CapacityParams, Scenario

SWEEP_AXES = {
    "rct_team_size": "rct.team_size", "rctTeamSize": "rct.team_size",
    "su_count": "sus.random.count", "suCount": "sus.random.count",
    "antenna_count": "capacity.num_tx", "antennaCount": "capacity.num_tx",
}


# ---------------------------------------------------------------- configuration

def default_config(scale: str = "scaled") -> dict:
    """Built-in scenario: ``scaled`` (N_t = 8, coarse steps) or ``full`` (N_t = 32)."""
    name = {"scaled": "default.yaml", "full": "full.yaml"}.get(scale)
    if name is None:
        raise ValueError(f"unknown scale {scale!r}; use 'scaled' or 'full'")
    text = resources.files("retf").joinpath("data", name).read_text()
    return yaml.safe_load(text)


def load_config(path: str | os.PathLike) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([("", f"not valid YAML: {exc}")]) from exc
    if not isinstance(data, dict):
        raise ConfigError([("", "top level must be a mapping")])
    return data


_MISSING = object()


class _Reader:
    """Pulls typed values out of nested mappings and records every problem with its path."""

    def __init__(self, data: Mapping):
        self.data = data
        self.problems: list[tuple[str, str]] = []

    def _lookup(self, path: str):
        node: Any = self.data
        for part in path.split("."):
            if not isinstance(node, Mapping) or part not in node:
                return _MISSING
            node = node[part]
        return node

    def fail(self, path: str, msg: str) -> None:
        self.problems.append((path, msg))

    def number(self, path: str, default=_MISSING, check: Callable[[float], bool] | None = None,
               rule: str = "", integer: bool = False, allow_none: bool = False):
        v = self._lookup(path)
        if v is _MISSING or (v is None and not allow_none):
            if default is _MISSING:
                self.fail(path, "required")
                return None
            return default
        if v is None:
            return None
        if isinstance(v, bool):
            self.fail(path, "expected a number, got a boolean")
            return None
        try:
            x = float(v)
        except (TypeError, ValueError):
            self.fail(path, f"expected a number, got {v!r}")
            return None
        if integer:
            if not float(x).is_integer():
                self.fail(path, f"expected an integer, got {v!r}")
                return None
            x = int(x)
        elif math.isnan(x):
            self.fail(path, "must not be NaN")
            return None
        if check is not None and not check(x):
            self.fail(path, rule or "out of range")
            return None
        return x

    def vector(self, path: str, default=_MISSING, unit: bool = False):
        v = self._lookup(path)
        if v is _MISSING:
            if default is _MISSING:
                self.fail(path, "required")
                return None
            return default
        try:
            xs = [float(c) for c in v]
        except (TypeError, ValueError):
            self.fail(path, f"expected three numbers, got {v!r}")
            return None
        if len(xs) != 3 or not all(math.isfinite(c) for c in xs):
            self.fail(path, "expected three finite numbers")
            return None
        if unit and abs(math.sqrt(sum(c * c for c in xs)) - 1.0) > 1e-9:
            self.fail(path, "must be a unit vector")
            return None
        return Vec3(*xs)

    def choice(self, path: str, options: Sequence[str], default=_MISSING):
        v = self._lookup(path)
        if v is _MISSING:
            if default is _MISSING:
                self.fail(path, "required")
            return None if default is _MISSING else default
        if v not in options:
            self.fail(path, f"must be one of {', '.join(options)}")
            return None
        return v

    def pairs(self, path: str):
        v = self._lookup(path)
        if v is _MISSING or v is None:
            return None
        try:
            out = tuple((int(a), int(b)) for a, b in v)
        except (TypeError, ValueError):
            self.fail(path, "expected a list of [start, end] index pairs")
            return None
        return out

    def items(self, path: str) -> list:
        v = self._lookup(path)
        if v is _MISSING or v is None:
            return []
        if not isinstance(v, list):
            self.fail(path, "expected a list")
            return []
        return v


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario file contents plus the entities derived from it."""

    raw: dict
    scenario: Scenario
    zeta: float
    groups: tuple[tuple[int, int], ...] | None
    road_width: float
    probe_x: float | None = None

    @property
    def seed(self) -> int:
        return self.scenario.seed

    def digest(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: Mapping) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _antenna(r: _Reader, path: str) -> AntennaPattern | None:
    if r._lookup(path) == "omni":
        from .propagation import OMNI
        return OMNI
    gmax = r.number(f"{path}.max_gain_db", 8.0)
    bw = r.number(f"{path}.beamwidth_3db", 65.0, lambda x: x > 0, "must be positive")
    am = r.number(f"{path}.sidelobe_floor_db", 30.0, lambda x: x >= 0, "must be >= 0")
    sla = r.number(f"{path}.vertical_sla", 30.0, lambda x: x >= 0, "must be >= 0")
    if None in (gmax, bw, am, sla):
        return None
    return AntennaPattern(gmax, bw, am, sla)


def _transmitter(r: _Reader, path: str, index: int, item: Mapping | None = None) -> Transmitter | None:
    sub = _Reader(item) if item is not None else None
    rd = sub or r
    prefix = "" if item is not None else f"{path}."
    pos = rd.vector(f"{prefix}position")
    orient = rd.vector(f"{prefix}orientation", Vec3(0.0, 1.0, 0.0), unit=True)
    power = rd.number(f"{prefix}tx_power", 20.0, lambda x: x > 0, "must be positive")
    if sub is not None:
        r.problems.extend((f"{path}.{p}", m) for p, m in sub.problems)
    if None in (pos, orient, power):
        return None
    return Transmitter(pos, orient, power, index)


def _users(r: _Reader, raw: Mapping, n_g: int, length: float | None, width: float | None, seed: int):
    explicit = r.items("sus.explicit")
    rnd = r._lookup("sus.random")
    sus: list[SensitiveUser] = []
    for k, item in enumerate(explicit):
        sub = _Reader(item if isinstance(item, Mapping) else {})
        x = sub.number("encounter_x", check=lambda v: length is None or 0 <= v <= length, rule="must lie on the road")
        y = sub.number("lateral_y", 0.0, lambda v: width is None or abs(v) <= width / 2,
                       "must lie within half the road width")
        h = sub.number("serving_index", integer=True, check=lambda v: 1 <= v <= n_g,
                       rule=f"must be in 1..{n_g} (an interferer index)")
        v = sub.number("speed", 0.0)
        r.problems.extend((f"sus.explicit[{k}].{p}", m) for p, m in sub.problems)
        if None not in (x, y, h, v):
            sus.append(SensitiveUser(x, y, h, v))
    if rnd is not _MISSING and rnd is not None:
        count = r.number("sus.random.count", 0, lambda v: v >= 0, "must be >= 0", integer=True)
        kappa = r.number("sus.random.mobile_ratio", 0.0, lambda v: 0 <= v <= 1, "must lie in [0, 1]")
        s_mean = r.number("sus.random.speed_mean", 5.0, lambda v: v >= 0, "must be >= 0")
        s_std = r.number("sus.random.speed_std", 1.0, lambda v: v >= 0, "must be >= 0")
        if count and n_g < 1:
            r.fail("sus.random.count", "users need at least one interferer to serve them")
        elif None not in (count, kappa, s_mean, s_std, length, width) and count:
            sus.extend(random_users(count, kappa, s_mean, s_std, length, width, n_g, seed))
    return tuple(sus)


def random_users(count: int, kappa: float, speed_mean: float, speed_std: float, length: float,
                 width: float, n_g: int, seed: int) -> list[SensitiveUser]:
    """Seeded user placement; a share ``kappa`` of them move, in either direction."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 99]))
    xs = rng.uniform(0.0, length, count)
    ys = rng.uniform(-width / 2, width / 2, count)
    serving = rng.integers(1, n_g + 1, count)
    mobile = rng.uniform(0.0, 1.0, count) < kappa
    speed = np.abs(rng.normal(speed_mean, speed_std, count)) * rng.choice((-1.0, 1.0), count)
    return [SensitiveUser(float(x), float(y), int(h), float(v) if m else 0.0)
            for x, y, h, v, m in zip(xs, ys, serving, speed, mobile)]


def build_scenario(raw: Mapping) -> ScenarioConfig:
    """Validate a scenario mapping and build every entity; all problems are reported at once."""
    raw = copy.deepcopy(dict(raw))
    r = _Reader(raw)
    seed = r.number("seed", 0, integer=True)
    length = r.number("road.length", check=lambda x: x > 0, rule="must be positive")
    speed = r.number("road.tv_speed", 15.0, lambda x: x > 0, "must be positive")
    tv_h = r.number("road.tv_height", 1.5, lambda x: x >= 0, "must be >= 0")
    width = r.number("road.width", 8.0, lambda x: x >= 0, "must be >= 0")
    dt = r.number("time_step", 1e-3, lambda x: x > 0, "must be positive")
    mode = r.choice("capacity_mode", MODES, "geometry")
    zeta = r.number("zeta", check=lambda x: x >= 0, rule="must be >= 0")

    serving = _transmitter(r, "transmitters.serving", 0) if r._lookup("transmitters.serving") is not _MISSING \
        else (r.fail("transmitters.serving", "required"), None)[1]
    interferers = []
    for k, item in enumerate(r.items("transmitters.interferers")):
        t = _transmitter(r, f"transmitters.interferers[{k}]", k + 1, item if isinstance(item, Mapping) else {})
        interferers.append(t)
    if serving is not None and not serving.position.y < 0:
        r.fail("transmitters.serving.position", "the serving BS must sit at y < 0 (road is y = 0)")

    bs_pat = _antenna(r, "antenna.bs")
    tv_pat = _antenna(r, "antenna.tv")

    decay = r.number("loss.decay", math.log(10.0) / 4.0, lambda x: x > 0, "must be positive")
    thr = r.number("loss.threshold", 0.1, lambda x: 0 < x <= 1, "must lie in (0, 1]")
    carrier = r.number("loss.carrier_hz", 3.5e9, lambda x: x > 0, "must be positive")
    pl_exp = r.number("loss.pl_exponent", 2.2, lambda x: x > 0, "must be positive")
    pl_int = r.number("loss.pl_intercept_db", None, allow_none=True)
    rl = r.number("loss.reflection_loss_db", 10.0, lambda x: x >= 0, "must be >= 0")

    bw = r.number("capacity.bandwidth_hz", 20e6, lambda x: x > 0, "must be positive")
    nr = r.number("capacity.num_rx", 2, lambda x: x >= 1, "must be >= 1", integer=True)
    nt = r.number("capacity.num_tx", 8, lambda x: x >= 1, "must be >= 1", integer=True)
    if nr is not None and nt is not None and nt < nr:
        r.fail("capacity.num_tx", "must be >= capacity.num_rx")
    noise = r.number("capacity.noise_floor_w", None, lambda x: x >= 0, "must be >= 0", allow_none=True)
    eig_thr = r.number("capacity.eigen_threshold", 0.01, lambda x: 0 < x <= 1, "must lie in (0, 1]")
    su_pf = r.number("capacity.su_power_factor", 1.0, lambda x: x >= 0, "must be >= 0")

    fd = {}
    for key, default, check, rule, integer in (
            ("num_clusters", 4, lambda x: x >= 1, "must be >= 1", True),
            ("rays_per_cluster", 4, lambda x: x >= 1, "must be >= 1", True),
            ("delay_spread", 100e-9, lambda x: x > 0, "must be positive", False),
            ("angle_spread_deg", 10.0, lambda x: x >= 0, "must be >= 0", False),
            ("num_subcarriers", 32, lambda x: x >= 1, "must be >= 1", True),
            ("subcarrier_spacing_hz", 625e3, lambda x: x > 0, "must be positive", False),
            ("cluster_shadowing_db", 3.0, lambda x: x >= 0, "must be >= 0", False)):
        fd[key] = r.number(f"fading.{key}", default, check, rule, integer=integer)
    if None not in fd.values() and fd["num_clusters"] * fd["rays_per_cluster"] > fd["num_subcarriers"]:
        r.fail("fading.num_subcarriers", "must be >= num_clusters * rays_per_cluster (one delay tap per ray)")

    count = r.number("rpp.count", check=lambda x: x >= 1, rule="must be >= 1", integer=True)
    lam0 = r.number("rpp.patch_length", 4.0, lambda x: x > 0, "must be positive")
    mu0 = r.number("rpp.spacing", 1.0, lambda x: x >= 0, "must be >= 0")
    d0 = r.number("rpp.standoff", 10.0, lambda x: x > 0, "must be positive (panels at y > 0)")
    tg = r.number("rpp.switch_time", 0.0, lambda x: x >= 0, "must be >= 0")
    p_h = r.number("rpp.height", 1.5)
    if None not in (mu0, decay):
        limit = 2.0 * math.sqrt(math.log(2.0) / decay)
        if mu0 > limit + 1e-12:
            r.fail("rpp.spacing", f"exceeds 2*sqrt(ln2/decay) = {limit:.6g} m")
    if None not in (width, d0) and width / 2 >= d0:
        r.fail("road.width", "half the road width must stay below the panel standoff")
    init_groups = r.pairs("rpp.initial_groups")
    fixed_groups = r.pairs("rpp.groups")
    team = r.number("rct.team_size", 1, lambda x: x >= 1, "must be >= 1", integer=True)
    max_dist = r.number("rct.max_distance", math.inf, lambda x: x > 0, "must be positive")
    csi_age = r.number("hybrid.csi_age", 0.0, lambda x: x >= 0, "must be >= 0")
    csi_hor = r.number("hybrid.csi_horizon", math.inf, lambda x: x >= 0, "must be >= 0")

    probe = r.number("report.probe_x", None, lambda x: length is None or 0 <= x <= length,
                     "must lie on the road", allow_none=True)
    n_g = len(interferers)
    sus = _users(r, raw, n_g, length, width, seed if seed is not None else 0)

    if r.problems:
        raise ConfigError(r.problems)
    try:
        loss = LossModel(carrier, pl_exp, pl_int, rl, decay, thr)
        array = RppArray(count, lam0, mu0, d0, tg, p_h, decay)
        for name, groups in (("rpp.initial_groups", init_groups), ("rpp.groups", fixed_groups)):
            if groups is not None:
                try:
                    VirtualGroupSet.from_bounds(groups, count)
                except InvalidScenarioError as exc:
                    r.fail(name, str(exc))
        if r.problems:
            raise ConfigError(r.problems)
        sc = Scenario(
            road_length=length, transmitters=(serving, *interferers), sus=sus, array=array, loss=loss,
            bs_pattern=bs_pat, tv_pattern=tv_pat,
            capacity=CapacityParams(bw, nr, nt, noise, zeta),
            fading=FadingConfig(seed=seed, **fd), tv_speed=speed, tv_height=tv_h, time_step=dt,
            capacity_mode=mode, rct_team_size=team, rct_max_distance=max_dist, eigen_threshold=eig_thr,
            su_power_factor=su_pf, csi_age=csi_age, csi_horizon=csi_hor, initial_groups=init_groups, seed=seed)
    except InvalidScenarioError as exc:
        raise ConfigError([("", str(exc))]) from exc
    return ScenarioConfig(raw, sc, zeta, fixed_groups, width, probe)


def with_overrides(raw: Mapping, overrides: Mapping[str, Any]) -> dict:
    """Copy of ``raw`` with dotted-path keys replaced."""
    out = copy.deepcopy(dict(raw))
    for path, value in overrides.items():
        node = out
        parts = path.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return out


# ---------------------------------------------------------------- simulation

@dataclass
class SimulationTrace:
    times: np.ndarray
    positions: np.ndarray
    rank_org: np.ndarray
    rank_enh: np.ndarray
    c_org: np.ndarray
    c_enh: np.ndarray
    reflex_power: np.ndarray
    mvrg: np.ndarray
    active: list[tuple[int, ...]]
    su_positions: np.ndarray     # (n_su, n_steps)
    su_c_nrm: np.ndarray         # (n_su, n_steps)
    su_c_int: np.ndarray
    bandwidth: float
    road_length: float
    groups: VirtualGroupSet
    plans: list[RotationPlan]
    mode: str
    phi_sen: float
    zeta: float
    phi_tar_model: float | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def se_org(self) -> np.ndarray:
        return self.c_org / self.bandwidth

    @property
    def se_enh(self) -> np.ndarray:
        return self.c_enh / self.bandwidth

    @property
    def regions(self) -> list[str]:
        return [region_of(float(x), self.road_length) for x in self.positions]

    @property
    def phi_tar_trace(self) -> float:
        """Target ratio recomputed from the capacity columns."""
        return float(np.sum(self.c_enh) / np.sum(self.c_org))

    @property
    def phi_tar(self) -> float:
        """Target ratio from the capacity model; assisted runs only have the trace value."""
        return self.phi_tar_trace if self.phi_tar_model is None else self.phi_tar_model

    @property
    def phi(self) -> float:
        return self.phi_tar + self.zeta * self.phi_sen

    def su_se_loss(self) -> np.ndarray:
        """Per-user relative SE loss against the same user without any panel."""
        if self.su_c_nrm.size == 0:
            return np.zeros(0)
        return 1.0 - self.su_c_int.sum(axis=1) / self.su_c_nrm.sum(axis=1)

    def summary(self, probe_x: float | None = None) -> dict[str, Any]:
        """Run-level statistics; ``probe_x`` adds the values at the step closest to that position."""
        reg = np.array(self.regions)
        out: dict[str, Any] = {
            "mode": self.mode, "phi_tar": self.phi_tar, "phi_sen": self.phi_sen, "phi": self.phi,
            "zeta": self.zeta, "mean_rank_org": float(np.mean(self.rank_org)),
            "mean_rank_enh": float(np.mean(self.rank_enh)),
            "mean_se_org": float(np.mean(self.se_org)), "mean_se_enh": float(np.mean(self.se_enh)),
            "n_groups": len(self.groups),
            "groups": ";".join(f"{a}-{b}" for a, b in self.groups.bounds()),
        }
        for name in ("center", "edge"):
            m = reg == name
            if np.any(m):
                out[f"mean_se_org_{name}"] = float(np.mean(self.se_org[m]))
                out[f"mean_se_enh_{name}"] = float(np.mean(self.se_enh[m]))
                out[f"mean_rank_org_{name}"] = float(np.mean(self.rank_org[m]))
                out[f"mean_rank_enh_{name}"] = float(np.mean(self.rank_enh[m]))
                out[f"mean_reflex_power_{name}"] = float(np.mean(self.reflex_power[m]))
        if probe_x is not None:
            k = int(np.argmin(np.abs(self.positions - probe_x)))
            out["probe_x"] = float(self.positions[k])
            out["probe_reflex_power"] = float(self.reflex_power[k])
            out["probe_se_org"] = float(self.se_org[k])
            out["probe_se_enh"] = float(self.se_enh[k])
            out["probe_rank_enh"] = int(self.rank_enh[k])
        loss = self.su_se_loss()
        out["n_su"] = int(loss.size)
        out["mean_su_se_loss"] = float(np.mean(loss)) if loss.size else 0.0
        out["warnings"] = len(self.warnings)
        return out


def optimize(sc: Scenario, zeta: float, mode: str | None = None) -> tuple[VirtualGroupSet, PhiEvaluator]:
    """Group set chosen by the greedy search in the scenario's capacity mode.

    Hybrid mode starts from the geometry-based result and refines it with
    CSI when the channel snapshots are fresh enough.
    """
    mode = sc.capacity_mode if mode is None else mode
    if mode == "hybrid":
        geo = PhiEvaluator(sc, "geometry", zeta)
        res = gssa(sc, evaluator=geo)
        if not sc.csi_fresh:
            return res.groups, geo
        csi = PhiEvaluator(sc, "csi", zeta)
        return gssa(sc, evaluator=csi, initial=res.groups).groups, csi
    ev = PhiEvaluator(sc, mode, zeta)
    return gssa(sc, evaluator=ev).groups, ev


def activity_masks(sc: Scenario, groups: VirtualGroupSet, warnings: list[str]) -> np.ndarray:
    """``(n_groups, n_steps)`` switching state driven by the SSM commands."""
    areas = sc.areas(groups)
    try:
        events = ssm_schedule(areas, sc.tv_speed, sc.array.switch_time, check=True)
    except ConstraintViolation as exc:
        warnings.append(f"ssm: {exc}")
        events = ssm_schedule(areas, sc.tv_speed, sc.array.switch_time, check=False)
    t = sc.times
    on = np.full(len(groups), np.inf)
    off = np.full(len(groups), -np.inf)
    for ev in events:
        if ev.action == "activate":
            on[ev.group] = ev.time + sc.array.switch_time
        else:
            off[ev.group] = ev.time
    return (t[None, :] >= on[:, None] - 1e-12) & (t[None, :] <= off[:, None] + 1e-12)


def run(cfg: ScenarioConfig | Scenario, groups: VirtualGroupSet | None = None, zeta: float | None = None,
        mode: str | None = None) -> SimulationTrace:
    """Drive the vehicle along the road and record capacities, ranks and user rates."""
    if isinstance(cfg, ScenarioConfig):
        sc = cfg.scenario
        zeta = cfg.zeta if zeta is None else zeta
        if groups is None and cfg.groups is not None:
            groups = VirtualGroupSet.from_bounds(cfg.groups, sc.array.count)
    else:
        sc = cfg
    zeta = sc.capacity.ilf if zeta is None else zeta
    warnings: list[str] = []
    if groups is None:
        groups, ev = optimize(sc, zeta, mode)
    else:
        ev = PhiEvaluator(sc, mode, zeta)
    n = sc.n_steps
    xs = sc.positions
    masks = activity_masks(sc, groups, warnings)

    all_steps = np.arange(n)
    group_list = list(groups)
    # assisting groups sit in the other parity, away from the vehicle, so their
    # own unrotated reflections are already zero where they assist
    s0s = ev.reflex_profile(group_list, all_steps) if group_list else np.zeros(n)

    areas = [ev.area(g) for g in group_list]
    ratios = np.array([a.ratio_array(xs) for a in areas]) * masks if group_list else np.zeros((0, n))
    mvrg = np.where(ratios.sum(axis=0) > 0, np.argmax(ratios, axis=0), -1) if group_list else np.full(n, -1)

    plans: list[RotationPlan] = []
    extra: dict[int, list[tuple[np.ndarray, np.ndarray, int]]] = {}
    su_sets = [([effective_panel(g, sc.array) for g in group_list], list(masks))] if group_list else []
    if sc.rct_team_size > 1 and len(groups) > 1:
        slack = pre_rotation_slack(areas, sc.tv_speed, sc.array.switch_time)
        for k, s in enumerate(slack):
            if s < 0:
                warnings.append(f"rct: team re-aim before area {k + 2} is {-s:.3g} s short of T_g")
        for i in range(len(groups)):
            steps = np.flatnonzero(mvrg == i)
            if steps.size == 0:
                continue
            plan = plan_for(i, groups, sc)
            plans.append(plan)
            for entry in plan.entries:
                p, via = assist_profile(entry, sc, xs[steps])
                s0s[steps] += p
                for k, pk, vk in zip(steps, p, via):
                    if pk > 0.0:
                        extra.setdefault(int(k), []).append((pk, vk, entry.group))
                if entry.contributes:
                    m = np.zeros(n, dtype=bool)
                    m[steps] = True
                    panels = entry_panels(entry, sc.array)
                    su_sets.append((panels, [m] * len(panels)))

    reflex_cov = None
    if ev.mode == "csi" and extra:
        reflex_cov = ev.covariances(all_steps)[1].copy()
        base = s0s.copy()
        for k, contribs in extra.items():
            base[k] -= sum(c[0] for c in contribs)
        for k, contribs in sorted(extra.items()):
            hd, hr = ev.step_channels(k)
            chans, weights = [hr], [max(base[k], 0.0)]
            tv = sc.tv_position(float(xs[k]))
            for pk, vk, g in contribs:
                via = Vec3(float(vk), sc.array.standoff, sc.array.height)
                chans.append(link_channel(sc.bs.position, sc.bs.orientation, tv, sc.sap, sc.capacity.num_tx,
                                          sc.capacity.num_rx, sc.fading, link_rng(sc.seed, AVRG_TAG, k, g),
                                          via=via))
                weights.append(pk)
            h, _ = combine_reflex(chans, weights)
            c = gram(h)
            reflex_cov[k] = 0.5 * (c + c.conj().T)
    c_enh, rank_enh = ev.enhanced(all_steps, s0s, reflex_cov)

    n_su = len(sc.sus)
    su_x = np.zeros((n_su, n))
    c_nrm = np.zeros((n_su, n))
    c_int = np.zeros((n_su, n))
    for j, su in enumerate(sc.sus):
        su_x[j] = su_track(sc, su)
        c_nrm[j], c_int[j] = su_series(sc, su, su_sets, su_fading(sc, j))

    active = [tuple(int(i) for i in np.flatnonzero(masks[:, k])) for k in range(n)] if group_list \
        else [()] * n
    return SimulationTrace(
        times=sc.times.copy(), positions=xs.copy(), rank_org=np.asarray(ev.rank_org).copy(),
        rank_enh=np.asarray(rank_enh), c_org=np.asarray(ev.c_org).copy(), c_enh=np.asarray(c_enh),
        reflex_power=s0s, mvrg=mvrg, active=active, su_positions=su_x, su_c_nrm=c_nrm, su_c_int=c_int,
        bandwidth=sc.capacity.bandwidth_hz, road_length=sc.road_length, groups=groups, plans=plans,
        mode=ev.mode, phi_sen=ev.su_ratio(groups), zeta=float(zeta),
        phi_tar_model=None if extra else ev.tv_ratio(groups), warnings=warnings)


# ---------------------------------------------------------------- sweeps

SWEEP_METRICS = ("phi_tar", "phi_sen", "phi", "mean_rank_org", "mean_rank_enh", "mean_se_org", "mean_se_enh",
                 "mean_se_org_center", "mean_se_enh_center", "mean_se_org_edge", "mean_se_enh_edge",
                 "mean_reflex_power_center", "mean_reflex_power_edge", "mean_su_se_loss",
                 "probe_reflex_power", "probe_se_org", "probe_se_enh", "probe_rank_enh")


def _sweep_job(args) -> dict[str, Any]:
    raw, = args
    cfg = build_scenario(raw)
    return run(cfg).summary(cfg.probe_x)


def sweep(raw: Mapping, axis: str, values: Sequence, seeds: Sequence[int] | None = None,
          workers: int | None = None) -> list[dict[str, Any]]:
    """One row per axis value with metric means and standard deviations over ``seeds``."""
    if axis not in SWEEP_AXES:
        raise ConfigError([("axis", f"unknown sweep axis {axis!r}; use one of rct_team_size, su_count, "
                                    "antenna_count")])
    path = SWEEP_AXES[axis]
    seeds = [int(raw.get("seed", 0))] if seeds is None else [int(s) for s in seeds]
    jobs = []
    for v in values:
        for s in seeds:
            cfg = with_overrides(raw, {path: v, "seed": s})
            if path == "sus.random.count":
                cfg.setdefault("sus", {}).setdefault("random", {})["count"] = v
            build_scenario(cfg)  # fail fast, in the caller, on bad values
            jobs.append((cfg,))
    limit = thread_limit() if workers is None else workers
    if limit > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(limit, len(jobs))) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = []
    for k, v in enumerate(values):
        chunk = results[k * len(seeds):(k + 1) * len(seeds)]
        row: dict[str, Any] = {"axis": axis, "value": v, "runs": len(chunk)}
        for m in SWEEP_METRICS:
            vals = [r[m] for r in chunk if m in r]
            if vals:
                row[f"{m}_mean"] = float(np.mean(vals))
                row[f"{m}_std"] = float(np.std(vals))
        rows.append(row)
    return rows


def thread_limit() -> int:
    env = os.environ.get("RETF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


# ---------------------------------------------------------------- output files

def fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_csv(dest: Path | TextIO, header: Sequence[str], rows) -> None:
    if not isinstance(dest, (str, os.PathLike)):
        _emit(dest, header, rows)
        return
    with open(dest, "w", newline="") as fh:
        _emit(fh, header, rows)


def _emit(fh: TextIO, header: Sequence[str], rows) -> None:
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(fmt(v) for v in row) + "\n")


TRACE_COLUMNS = ("step", "t", "x", "region", "rank_org", "rank_enh", "c_org", "c_enh", "se_org", "se_enh",
                 "reflex_power", "mvrg", "active_groups")


def write_trace(trace: SimulationTrace, out: Path, probe_x: float | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    regions = trace.regions
    write_csv(out / "trace.csv", TRACE_COLUMNS, (
        (k, trace.times[k], trace.positions[k], regions[k], trace.rank_org[k], trace.rank_enh[k],
         trace.c_org[k], trace.c_enh[k], trace.se_org[k], trace.se_enh[k], trace.reflex_power[k],
         trace.mvrg[k], ";".join(map(str, trace.active[k])))
        for k in range(trace.times.size)))
    w = trace.bandwidth
    write_csv(out / "su_trace.csv", ("step", "t", "su", "x", "se_nrm", "se_int"), (
        (k, trace.times[k], j, trace.su_positions[j, k], trace.su_c_nrm[j, k] / w, trace.su_c_int[j, k] / w)
        for j in range(trace.su_positions.shape[0]) for k in range(trace.times.size)))
    summary = trace.summary(probe_x)
    write_csv(out / "summary.csv", ("key", "value"), sorted(summary.items()))
    with open(out / "result.json", "w") as fh:
        json.dump({"groups": trace.groups.bounds(), "plans": [p.as_dict() for p in trace.plans],
                   "warnings": trace.warnings}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(out: Path, cfg: ScenarioConfig, extra: Mapping[str, Any] | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_sha256": cfg.digest(), "seed": cfg.seed, "retf": __version__,
        "python": platform.python_version(), "numpy": np.__version__, "pyyaml": yaml.__version__,
        "kernel_backend": kernels.BACKEND,
    }
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep(rows: Sequence[Mapping[str, Any]], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if not rows:
        return
    header = list(rows[0].keys())
    write_csv(out / "sweep.csv", header, ([r[h] for h in header] for r in rows))


__all__ = [
    "ScenarioConfig", "SimulationTrace", "default_config", "load_config", "build_scenario", "random_users",
    "with_overrides", "config_hash", "optimize", "activity_masks", "run", "sweep", "thread_limit",
    "write_trace", "write_manifest", "write_sweep", "write_csv", "SWEEP_AXES", "TRACE_COLUMNS",
]
