"""Slotted transmitter-receiver link simulation under jamming and benign degradation.

One observation window is a fixed number of time slots. Each slot the
transmitter, if it still has packets to deliver, performs a clear channel
assessment (CCA); a busy read defers the packet. Transmitted packets decode
with a probability driven by the slot's SINR. Four jammer behaviours plus a
benign "link degraded for another reason" scenario produce the labeled
telemetry that the classifiers consume.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict

import numpy as np
from numba import njit
from scipy.special import expit

from .datakit import Dataset
from .errors import DataError

JAMMER_KINDS = ("none", "benign_degraded", "constant", "random", "deceptive", "reactive")
ATTACK_KINDS = frozenset(("constant", "random", "deceptive", "reactive"))

_KIND_CODE = {k: i for i, k in enumerate(JAMMER_KINDS)}

# Reported RSS when a window decodes nothing: below any realistic reading.
RSS_FLOOR_DBM = -120.0

# Preamble sync survives roughly 6 dB below the full-decode reference SINR,
# so a failed packet can still be logged as received-with-errors.
SYNC_SINR_FACTOR = 0.25

SCENARIO_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ChannelConfig:
    """Static link parameters for one transmitter-receiver pair.

    Powers are linear watts. sinr_ref is the SINR at which a packet decodes
    correctly with probability one half; success_steepness controls how fast
    that probability moves with log-SINR.
    """

    tx_power_w: float
    tx_gain: float
    rx_gain: float
    tx_height_m: float
    rx_height_m: float
    distance_m: float
    noise_power_w: float
    slots_per_window: int
    packets_per_window_target: int
    sinr_ref: float
    success_steepness: float

    def __post_init__(self):
        for name in ("tx_power_w", "tx_gain", "rx_gain", "tx_height_m", "rx_height_m",
                     "distance_m", "sinr_ref", "success_steepness"):
            if not getattr(self, name) > 0:
                raise DataError(f"ChannelConfig.{name} must be > 0")
        if self.noise_power_w < 0:
            raise DataError("ChannelConfig.noise_power_w must be >= 0")
        if self.slots_per_window < 1 or self.packets_per_window_target < 1:
            raise DataError("window counts must be >= 1")
        if self.slots_per_window < self.packets_per_window_target:
            raise DataError("slots_per_window must be >= packets_per_window_target")


@dataclass(frozen=True)
class JammerProfile:
    """Per-window jammer behaviour.

    jam_power_w is the interference power as seen at the receiver (the path
    between jammer and receiver is folded in). duty_cycle is the random
    jammer's per-slot on-probability. decoy_packet_rate is the per-slot
    channel occupancy of deceptive decoy packets, and doubles as the
    background-traffic occupancy for benign_degraded scenarios.
    """

    kind: str
    jam_power_w: float = 0.0
    duty_cycle: float = 1.0
    sense_delay_slots: int = 0
    decoy_packet_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in JAMMER_KINDS:
            raise DataError(f"unknown jammer kind {self.kind!r}")
        if self.jam_power_w < 0:
            raise DataError("jam_power_w must be >= 0")
        if not 0.0 <= self.duty_cycle <= 1.0:
            raise DataError("duty_cycle must be in [0, 1]")
        if not 0.0 <= self.decoy_packet_rate <= 1.0:
            raise DataError("decoy_packet_rate must be in [0, 1]")
        if self.sense_delay_slots < 0:
            raise DataError("sense_delay_slots must be >= 0")
        if self.kind in ("none", "benign_degraded") and self.jam_power_w != 0.0:
            raise DataError(f"kind {self.kind!r} requires jam_power_w = 0")

    @property
    def is_attack(self) -> bool:
        return self.kind in ATTACK_KINDS


@dataclass(frozen=True)
class LinkWindow:
    """Raw per-window event counts and power measurements."""

    packets_sent: int
    packets_acked: int
    packets_received: int
    packets_erroneous: int
    cca_attempts: int
    cca_busy: int
    rss_sum_w: float
    scenario_label: int

    def __post_init__(self):
        if self.packets_acked > self.packets_sent:
            raise DataError("packets_acked cannot exceed packets_sent")
        if self.packets_erroneous > self.packets_received:
            raise DataError("packets_erroneous cannot exceed packets_received")
        if self.cca_busy > self.cca_attempts:
            raise DataError("cca_busy cannot exceed cca_attempts")
        if self.scenario_label not in (0, 1):
            raise DataError("scenario_label must be 0 or 1")


@dataclass(frozen=True)
class Sample:
    """One feature vector (pdr, bpr, rss_dbm, cca_busy_ratio) with its label."""

    pdr: float
    bpr: float
    rss_dbm: float
    cca_busy_ratio: float
    label: int

    def __post_init__(self):
        for name in ("pdr", "bpr", "cca_busy_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"Sample.{name}={v} outside [0, 1]")
        if not math.isfinite(self.rss_dbm):
            raise DataError("Sample.rss_dbm must be finite")
        if self.label not in (0, 1):
            raise DataError("Sample.label must be 0 or 1")

    def features(self) -> np.ndarray:
        return np.array([self.pdr, self.bpr, self.rss_dbm, self.cca_busy_ratio])


def rss_linear(cfg: ChannelConfig) -> float:
    """Received desired-signal power (two-ray ground model, d**4 falloff)."""
    if not cfg.distance_m > 0:
        raise DataError("distance must be > 0")
    h2 = cfg.tx_height_m ** 2 * cfg.rx_height_m ** 2
    return cfg.tx_power_w * cfg.tx_gain * cfg.rx_gain * h2 / cfg.distance_m ** 4


def success_probability(sinr: float, sinr_ref: float, steepness: float) -> float:
    """Per-packet correct-decode probability: logistic in log(SINR / reference)."""
    if sinr <= 0.0:
        return 0.0
    if math.isinf(sinr):
        return 1.0
    return float(expit(steepness * math.log(sinr / sinr_ref)))


def cca_detect_probability(jam_power_w: float, cfg: ChannelConfig) -> float:
    """Probability an energy-sensing CCA reads busy while raw jam energy is on air.

    Detection is logistic in the jam power relative to sinr_ref * noise floor,
    with the channel's decode steepness: stronger jammers defer the
    transmitter more often, weaker ones slip under the carrier-sense floor.
    """
    if jam_power_w <= 0.0:
        return 0.0
    if cfg.noise_power_w == 0.0:
        return 1.0
    ratio = jam_power_w / (cfg.sinr_ref * cfg.noise_power_w)
    return float(expit(cfg.success_steepness * math.log(ratio)))


@njit(cache=True)
def _run_window(kind, slots, target, duty, occupancy, sense_delay,
                p_detect, pc_clear, pr_clear, pc_jam, pr_jam,
                u_state, u_cca, u_pkt):
    """Slot loop for one window.

    Returns (sent, received, erroneous, acked, cca_attempts, cca_busy).
    Kind codes: 0 none, 1 benign_degraded, 2 constant, 3 random,
    4 deceptive, 5 reactive.
    """
    sent = 0
    received = 0
    erroneous = 0
    acked = 0
    attempts = 0
    busy = 0
    first_tx = -1
    for t in range(slots):
        if sent >= target:
            break
        occupied = False
        jam_on = False
        if kind == 2:
            jam_on = True
        elif kind == 3:
            jam_on = u_state[t] < duty
        elif kind == 4 or kind == 1:
            occupied = u_state[t] < occupancy
        elif kind == 5:
            jam_on = first_tx >= 0 and t >= first_tx + sense_delay
        attempts += 1
        if occupied or (jam_on and u_cca[t] < p_detect):
            busy += 1
            continue
        if first_tx < 0:
            first_tx = t
            if kind == 5 and sense_delay == 0:
                # in-slot reaction: the trigger packet itself gets jammed
                jam_on = True
        sent += 1
        if jam_on:
            pc = pc_jam
            pr = pr_jam
        else:
            pc = pc_clear
            pr = pr_clear
        u = u_pkt[t]
        if u < pc:
            received += 1
            acked += 1
        elif u < pr:
            received += 1
            erroneous += 1
    return sent, received, erroneous, acked, attempts, busy


def simulate_window(cfg: ChannelConfig, jam: JammerProfile, seed) -> LinkWindow:
    """Simulate one observation window. Pure function of (cfg, jam, seed).

    Per transmitted packet the SINR is rss / (noise + jam power present in
    that slot); the packet decodes correctly with probability
    logistic(success_steepness * ln(SINR / sinr_ref)) and is then acked.
    Failed packets may still be logged at the receiver as erroneous when the
    preamble sync (a SYNC_SINR_FACTOR easier threshold) succeeds.

    The accumulated RSS over correctly decoded packets is degraded by the
    window's decode rate, so links under attack report lower signal strength.
    """
    rng = np.random.default_rng(seed)
    rss = rss_linear(cfg)
    noise = cfg.noise_power_w

    def _pair(jam_power: float) -> tuple[float, float]:
        denom = noise + jam_power
        sinr = math.inf if denom == 0.0 else rss / denom
        pc = success_probability(sinr, cfg.sinr_ref, cfg.success_steepness)
        pr = success_probability(sinr, cfg.sinr_ref * SYNC_SINR_FACTOR,
                                 cfg.success_steepness)
        return pc, pr

    pc_clear, pr_clear = _pair(0.0)
    pc_jam, pr_jam = _pair(jam.jam_power_w)
    p_detect = cca_detect_probability(jam.jam_power_w, cfg)

    slots = cfg.slots_per_window
    u_state = rng.random(slots)
    u_cca = rng.random(slots)
    u_pkt = rng.random(slots)

    sent, received, erroneous, acked, attempts, busy = _run_window(
        _KIND_CODE[jam.kind], slots, cfg.packets_per_window_target,
        jam.duty_cycle, jam.decoy_packet_rate, jam.sense_delay_slots,
        p_detect, pc_clear, pr_clear, pc_jam, pr_jam,
        u_state, u_cca, u_pkt,
    )

    capture = acked / sent if sent > 0 else 0.0
    rss_sum = acked * rss * capture
    return LinkWindow(
        packets_sent=sent,
        packets_acked=acked,
        packets_received=received,
        packets_erroneous=erroneous,
        cca_attempts=attempts,
        cca_busy=busy,
        rss_sum_w=rss_sum,
        scenario_label=1 if jam.is_attack else 0,
    )


def extract_features(w: LinkWindow, rss_floor_dbm: float = RSS_FLOOR_DBM) -> Sample:
    """Reduce a window to the four-feature sample. Zero denominators give 0."""
    pdr = w.packets_acked / w.packets_sent if w.packets_sent > 0 else 0.0
    bpr = w.packets_erroneous / w.packets_received if w.packets_received > 0 else 0.0
    cca = w.cca_busy / w.cca_attempts if w.cca_attempts > 0 else 0.0
    correct = w.packets_received - w.packets_erroneous
    if correct > 0 and w.rss_sum_w > 0.0:
        rss_dbm = 10.0 * math.log10(1000.0 * w.rss_sum_w / correct)
        rss_dbm = max(rss_dbm, rss_floor_dbm)
    else:
        rss_dbm = rss_floor_dbm
    return Sample(pdr=pdr, bpr=bpr, rss_dbm=rss_dbm, cca_busy_ratio=cca,
                  label=w.scenario_label)


def generate_dataset(scenario_mix, n: int, seed: int) -> Dataset:
    """Draw n windows from a weighted scenario mix.

    scenario_mix: list of (ChannelConfig, JammerProfile, weight) tuples.
    Window i uses a seed derived from (seed, i), so datasets are reproducible
    and windows could be generated in parallel.
    """
    if not scenario_mix:
        raise DataError("empty scenario mix")
    if n < 1:
        raise DataError("n must be >= 1")
    weights = np.array([float(w) for _, _, w in scenario_mix], dtype=np.float64)
    if np.any(weights < 0) or weights.sum() <= 0:
        raise DataError("weights must be >= 0 with positive sum")
    probs = weights / weights.sum()

    master = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    choices = master.choice(len(scenario_mix), size=n, p=probs)

    feats = np.empty((n, 4), dtype=np.float64)
    labels = np.empty(n, dtype=np.uint8)
    for i in range(n):
        cfg, jam, _ = scenario_mix[choices[i]]
        window_seed = np.random.SeedSequence([int(seed), i])
        s = extract_features(simulate_window(cfg, jam, window_seed))
        feats[i, 0] = s.pdr
        feats[i, 1] = s.bpr
        feats[i, 2] = s.rss_dbm
        feats[i, 3] = s.cca_busy_ratio
        labels[i] = s.label

    meta = {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "generator": "jamguard.simkit.generate_dataset",
        "seed": int(seed),
        "n": int(n),
        "scenarios": scenario_mix_to_dict(scenario_mix)["scenarios"],
        "config_sha256": scenario_mix_digest(scenario_mix),
    }
    return Dataset(feats, labels, meta)


def scenario_mix_to_dict(scenario_mix) -> dict:
    return {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "scenarios": [
            {"weight": float(w), "channel": asdict(cfg), "jammer": asdict(jam)}
            for cfg, jam, w in scenario_mix
        ],
    }


def scenario_mix_digest(scenario_mix) -> str:
    blob = json.dumps(scenario_mix_to_dict(scenario_mix), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def load_scenario_mix(path) -> list:
    """Parse a scenario-mix JSON config into (cfg, jammer, weight) tuples."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise DataError(f"{path}: missing required schema_version field")
    if doc["schema_version"] != SCENARIO_SCHEMA_VERSION:
        raise DataError(
            f"{path}: unsupported schema_version {doc['schema_version']}"
        )
    entries = doc.get("scenarios")
    if not entries:
        raise DataError(f"{path}: empty scenario list")
    mix = []
    for i, entry in enumerate(entries):
        try:
            cfg = ChannelConfig(**entry["channel"])
            jam = JammerProfile(**entry["jammer"])
            weight = float(entry["weight"])
        except (KeyError, TypeError) as e:
            raise DataError(f"{path}: scenario {i}: {e}") from None
        mix.append((cfg, jam, weight))
    return mix


def save_scenario_mix(scenario_mix, path) -> None:
    with open(path, "w") as f:
        json.dump(scenario_mix_to_dict(scenario_mix), f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# Canonical dataset: the default data source every experiment refers to.
# ---------------------------------------------------------------------------

CANONICAL_SEED = 42
CANONICAL_SIZE = 10000

_BASE = dict(
    tx_power_w=0.1,
    tx_gain=1.0,
    rx_gain=1.0,
    tx_height_m=1.5,
    rx_height_m=1.5,
    distance_m=50.0,
    noise_power_w=1.2e-9,
    slots_per_window=80,
    packets_per_window_target=20,
    sinr_ref=8.0,
    success_steepness=2.0,
)


def canonical_mix() -> list:
    """Default scenario mix: 50% non-attack (clear + degraded), 50% jammers.

    The benign_degraded scenario is a hard negative: longer distance, a
    higher noise floor, and light background channel occupancy, so the link
    is visibly degraded without any jammer present. The random jammer is
    weak enough to slip under carrier sensing part of the time, and the
    deceptive jammer floods an already-weak long link, so several attack
    clusters brush against the benign ones.
    """
    clear = ChannelConfig(**_BASE)
    degraded = ChannelConfig(**{**_BASE, "distance_m": 53.5, "noise_power_w": 3.99e-9})
    weak_far = ChannelConfig(**{**_BASE, "distance_m": 87.0})
    return [
        (clear, JammerProfile(kind="none"), 0.25),
        (degraded, JammerProfile(kind="benign_degraded", decoy_packet_rate=0.06), 0.25),
        (clear, JammerProfile(kind="constant", jam_power_w=2.4e-8), 0.125),
        (clear, JammerProfile(kind="random", jam_power_w=8.5e-9, duty_cycle=0.45), 0.125),
        (weak_far, JammerProfile(kind="deceptive", decoy_packet_rate=0.6), 0.125),
        (clear, JammerProfile(kind="reactive", jam_power_w=1.05e-8,
                              sense_delay_slots=10), 0.125),
    ]


def canonical_dataset(n: int = CANONICAL_SIZE, seed: int = CANONICAL_SEED) -> Dataset:
    return generate_dataset(canonical_mix(), n, seed)
