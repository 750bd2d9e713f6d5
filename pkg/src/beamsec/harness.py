"""End-to-end experiments: scene construction, the four schemes, colluding sweeps.

Every scheme is scored against the same Eve channel draws. Random streams are split
from the root seed by fixed keys, so results depend only on (config, seed).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import coding
from .adversary import AttackerKind, EveNode
from .allocation import TimeAllocation, optimize, uniform
from .channel import ArraySpec, ChannelStatModel, NoiseSpec, assemble, derive_seed
from .codebook import (AngularChannelProfile, BeamPair, Codebook, beam_train, make_codebook,
                       make_pair, snr_bob, tau_from_threshold)
from .config import ExperimentConfig
from .scenario import GeometryError, PathSet, Point2D, Reflector, Room, Segment, eve_grid, trace_paths
from .secrecy import (EveEnsemble, SecrecyReport, capacity, instantaneous_secrecy, location_rates,
                      zero_leakage_rate)
from .selection import NoSecureBeamsError, select_beamsec_pairs

# seed stream keys under the root seed
STREAM_KMEANS = 1
STREAM_HOP = 2
STREAM_ENSEMBLE = 3
STREAM_LEAKAGE = 4
STREAM_CODING = 5
STREAM_SUBSETS = 6


class PipelineError(RuntimeError):
    """A stage failed; the message names the scheme or location involved."""


class Variant(str, enum.Enum):
    LEGACY = "legacy"
    RANDOM_HOP = "random_hop"
    BEAMSEC_UNIFORM = "beamsec_uniform"
    BEAMSEC_OPT = "beamsec_opt"


VARIANTS = tuple(Variant)


@dataclass(frozen=True)
class Scheme:
    variant: Variant
    hop_paths: int = 3
    hop_seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.hop_paths < 1:
            raise ValueError("random hopping needs at least one path")


@dataclass(frozen=True, eq=False)
class Scene:
    """Everything deterministic about an experiment: geometry, arrays, codebooks, training."""

    config: ExperimentConfig
    room: Room
    tx: Point2D
    rx: Point2D
    tx_array: ArraySpec
    rx_array: ArraySpec
    W: Codebook
    F: Codebook
    noise: NoiseSpec
    tau_acp: float
    bob_paths: PathSet
    H_b: np.ndarray
    acp: AngularChannelProfile
    ensemble: EveEnsemble
    kind: AttackerKind

    @property
    def locations(self) -> tuple[Point2D, ...]:
        return self.ensemble.locations


@dataclass(frozen=True, eq=False)
class SchemeResult:
    scheme: Scheme
    pairs: tuple[BeamPair, ...]
    allocation: TimeAllocation
    report: SecrecyReport
    worst_eve: np.ndarray  # (n_locations, L) worst sampled Eve capacity
    equivocation: Optional[np.ndarray]  # per location, bits; None if not enumerable

    @property
    def zero_leakage_rate(self) -> float:
        return zero_leakage_rate(self.report.leakage_rates, self.report.leakage)


@dataclass(frozen=True)
class CurvePoint:
    q: int
    mean: float
    worst: float
    n_subsets: int


@dataclass(frozen=True, eq=False)
class RunResult:
    seed: int
    config_digest: str
    draw_digest: str
    locations: tuple[Point2D, ...]
    schemes: dict  # Variant -> SchemeResult
    colluding: dict  # Variant -> list[CurvePoint]
    colluding_protocol: str
    acp: AngularChannelProfile
    tau_acp: float

    def __getitem__(self, variant) -> SchemeResult:
        return self.schemes[Variant(variant)]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config_digest": self.config_digest,
            "draw_digest": self.draw_digest,
            "tau_acp": self.tau_acp,
            "locations": [[p.x, p.y] for p in self.locations],
            "schemes": {v.value: _scheme_dict(r) for v, r in self.schemes.items()},
            "colluding": {
                "protocol": self.colluding_protocol,
                "curves": {v.value: [_curve_dict(c) for c in curve]
                           for v, curve in self.colluding.items()},
            },
        }


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def pair_dict(p: BeamPair) -> dict:
    return {
        "tx_index": p.tx_index,
        "rx_index": p.rx_index,
        "tx_angle": p.tx_beam.steer_angle,
        "rx_angle": p.rx_beam.steer_angle,
        "backoff_db": p.backoff,
        "magnitude": p.magnitude,
        "tuned_magnitude": p.tuned_magnitude,
    }


def _scheme_dict(r: SchemeResult) -> dict:
    rep = r.report
    return {
        "pairs": [pair_dict(p) for p in r.pairs],
        "fractions": _floats(r.allocation.fractions),
        "objective": r.allocation.objective,
        "bob_capacities": _floats(rep.bob_capacities),
        "csl": _floats(rep.csl),
        "location_rates": _floats(rep.location_rates),
        "absolute_rate": rep.absolute_rate,
        "mean_rate": rep.mean_rate,
        "zero_leakage_rate": r.zero_leakage_rate,
        "leakage": {"rates": _floats(rep.leakage_rates), "probabilities": _floats(rep.leakage)},
        "equivocation": None if r.equivocation is None else _floats(r.equivocation),
    }


def _curve_dict(c: CurvePoint) -> dict:
    return {"q": c.q, "mean": c.mean, "worst": c.worst, "n_subsets": c.n_subsets}


def _segment(s, cls=Segment, **kw):
    return cls(Point2D(*s.start), Point2D(*s.end), **kw)


def build_room(config: ExperimentConfig) -> Room:
    sc = config.scenario
    walls = tuple(_segment(r, Reflector, reflection_loss=r.loss_db) for r in sc.reflectors)
    obstacles = tuple(_segment(o) for o in sc.obstacles)
    return Room(walls, obstacles, tuple(sc.bounds))


def _array(cfg, default_boresight: float) -> ArraySpec:
    bs = default_boresight if cfg.boresight is None else cfg.boresight
    return ArraySpec(cfg.elements, cfg.spacing, bs)


def trace(config: ExperimentConfig, tx: Point2D, rx: Point2D, room: Optional[Room] = None) -> PathSet:
    sc = config.scenario
    return trace_paths(room or build_room(config), tx, rx, sc.max_order, sc.min_gain_db,
                       sc.carrier_ghz * 1e9)


def build_scene(config: ExperimentConfig) -> Scene:
    """Trace, assemble and beam-train the Alice-Bob link; trace every Eve location."""
    sc, cb = config.scenario, config.codebook
    room = build_room(config)
    tx, rx = Point2D(*sc.tx), Point2D(*sc.rx)
    tx_array = _array(config.arrays.tx, tx.bearing_to(rx))
    rx_array = _array(config.arrays.rx, rx.bearing_to(tx))
    W = make_codebook(tx_array, cb.tx_beams, cb.span_deg)
    F = make_codebook(rx_array, cb.rx_beams, cb.span_deg)
    noise = NoiseSpec.from_dbm(config.link.noise_dbm, config.link.tx_power_dbm)
    tau = tau_from_threshold(10 ** (config.link.decode_snr_db / 10), noise, cb.acp_margin_db)

    bob_paths = trace(config, tx, rx, room)
    H_b = assemble(bob_paths, tx_array, rx_array)
    acp = beam_train(H_b, W, F)

    g = config.eve_grid
    locations = eve_grid(room, g.spacing, (tx, rx), g.exclusion_radius,
                         None if g.region is None else tuple(g.region))
    ea = config.arrays.eve
    paths, nodes = [], []
    for i, p in enumerate(locations):
        try:
            paths.append(trace(config, tx, p, room))
        except GeometryError as exc:
            raise PipelineError(f"eve location {i} ({p.x}, {p.y}): {exc}") from exc
        node = EveNode.facing(p, tx, ea.elements, ea.spacing, cb.eve_beams, cb.eve_span_deg)
        if ea.boresight is not None:
            array = ArraySpec(ea.elements, ea.spacing, ea.boresight)
            node = EveNode(p, array, make_codebook(array, cb.eve_beams, cb.eve_span_deg))
        nodes.append(node)
    en = config.ensemble
    model = ChannelStatModel(en.gain_sigma_db, en.angle_sigma_deg, en.random_phase)
    ensemble = EveEnsemble(tuple(locations), tuple(paths), tuple(nodes), model, tx_array,
                           en.samples_per_location)
    return Scene(config, room, tx, rx, tx_array, rx_array, W, F, noise, tau, bob_paths, H_b, acp,
                 ensemble, AttackerKind(config.attacker.model))


def legacy_pair(scene: Scene) -> BeamPair:
    """Single highest-ACP pair at full power (ties go to the lowest flat index)."""
    mag = scene.acp.magnitude
    tx, rx = np.unravel_index(int(np.argmax(mag)), mag.shape)
    if mag[tx, rx] < scene.tau_acp:
        raise NoSecureBeamsError("no beam pair reaches the decode threshold")
    return make_pair(scene.W, scene.F, scene.acp, tx, rx)


def random_hop_pairs(scene: Scene, n_paths: int, seed: int) -> tuple[BeamPair, ...]:
    """`n_paths` decodable ACP entries drawn uniformly without replacement, full power."""
    if n_paths < 1:
        raise ValueError("random hopping needs at least one path")
    candidates = np.argwhere(scene.acp.magnitude >= scene.tau_acp)
    if len(candidates) == 0:
        raise NoSecureBeamsError("no beam pair reaches the decode threshold")
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(len(candidates), size=min(n_paths, len(candidates)), replace=False))
    return tuple(make_pair(scene.W, scene.F, scene.acp, *candidates[i]) for i in picks)


def beamsec_pairs(scene: Scene, seed: int) -> tuple[BeamPair, ...]:
    """Clustered, diverse, gain-tuned pairs; a lone survivor collapses to the legacy pair."""
    cfg, sel = scene.config.codebook, scene.config.selection
    chosen = select_beamsec_pairs(scene.acp, scene.W, scene.F, scene.tau_acp, seed,
                                  cfg.backoff_step_db, cfg.max_backoff_db, sel.k_max,
                                  sel.min_sep_deg, sel.max_iter)
    if len(chosen) == 1:
        return (legacy_pair(scene),)
    return chosen.pairs


def scheme_pairs(scene: Scene, scheme: Scheme, seed: int) -> tuple[BeamPair, ...]:
    try:
        if scheme.variant is Variant.LEGACY:
            return (legacy_pair(scene),)
        if scheme.variant is Variant.RANDOM_HOP:
            hop_seed = derive_seed(seed, STREAM_HOP) if scheme.hop_seed is None else scheme.hop_seed
            return random_hop_pairs(scene, scheme.hop_paths, hop_seed)
        return beamsec_pairs(scene, derive_seed(seed, STREAM_KMEANS))
    except (NoSecureBeamsError, ValueError) as exc:
        raise PipelineError(f"scheme {scheme.variant.value}: {exc}") from exc


def bob_capacities(scene: Scene, pairs: Sequence[BeamPair]) -> np.ndarray:
    return np.array([capacity(snr_bob(scene.H_b, p, scene.noise)) for p in pairs])


def secrecy_csl(c_bob, worst_eve) -> np.ndarray:
    """Per-location, per-path secrecy capacity against the worst sampled Eve channel."""
    return np.maximum(np.asarray(c_bob, dtype=float) - np.asarray(worst_eve, dtype=float), 0.0)


def _allocate(variant: Variant, csl: np.ndarray, measured: Optional[list[int]]) -> TimeAllocation:
    L = csl.shape[1]
    if variant is Variant.BEAMSEC_OPT:
        rows = csl if measured is None else csl[measured]
        return optimize(rows)
    alloc = uniform(L)
    rows = csl if measured is None else csl[measured]
    return TimeAllocation(alloc.fractions, float(np.min(location_rates(alloc, rows))))


def _equivocation(scene: Scene, c_bob, worst_eve, seed: int) -> Optional[np.ndarray]:
    cc = scene.config.coding
    L = len(c_bob)
    if cc.bits_per_path * L > 20 or cc.message_bits > cc.bits_per_path * L:
        return None
    partition = coding.build([2 ** cc.bits_per_path] * L, cc.message_bits,
                             derive_seed(seed, STREAM_CODING, L))
    if cc.intercept_snr_db is None:
        threshold = np.asarray(c_bob, dtype=float)
    else:
        threshold = np.full(L, capacity(10 ** (cc.intercept_snr_db / 10)))
    cache: dict = {}
    out = []
    for row in np.asarray(worst_eve):
        pattern = tuple(bool(x) for x in row >= threshold)
        if pattern not in cache:
            cache[pattern] = coding.equivocation(partition, pattern)
        out.append(cache[pattern])
    return np.array(out)


def _subsets(n: int, q: int, exhaustive: bool, perms: Optional[np.ndarray]) -> np.ndarray:
    if exhaustive:
        return np.array(list(itertools.combinations(range(n), q)), dtype=np.int64).reshape(-1, q)
    return np.sort(perms[:, :q], axis=1)


def colluding_curve(T, c_bob, worst_eve, q_max: int, exhaustive_limit: int = 12,
                    sampled_subsets: int = 500, seed: int = 0) -> list[CurvePoint]:
    """Mean and worst absolute rate over size-Q colluder subsets of the grid, Q = 1..q_max.

    A coalition's per-transmission SNR is the best single member, so its worst-case
    capacity per path is the maximum of the members' worst-case capacities. Grids up
    to `exhaustive_limit` locations enumerate every subset; larger grids use nested
    prefixes of `sampled_subsets` seeded random permutations, which keeps the curve
    monotone in Q.
    """
    worst_eve = np.asarray(worst_eve, dtype=float)
    n = worst_eve.shape[0]
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    if q_max > n:
        raise ValueError(f"cannot form coalitions of {q_max} from {n} grid locations")
    exhaustive = n <= exhaustive_limit
    perms = None
    if not exhaustive:
        rng = np.random.default_rng(seed)
        perms = np.stack([rng.permutation(n) for _ in range(sampled_subsets)])
    curve = []
    for q in range(1, q_max + 1):
        subsets = _subsets(n, q, exhaustive, perms)
        coalition = worst_eve[subsets].max(axis=1)  # (n_subsets, L)
        rates = location_rates(T, secrecy_csl(c_bob, coalition))
        curve.append(CurvePoint(q, float(rates.mean()), float(rates.min()), len(subsets)))
    return curve


def colluding_protocol(config: ExperimentConfig, n_locations: int) -> str:
    c = config.colluding
    if n_locations <= c.exhaustive_limit:
        return "exhaustive: every size-Q subset of the grid"
    return f"sampled: prefixes of {c.sampled_subsets} seeded permutations of the grid"


def run(config: ExperimentConfig, seed: Optional[int] = None, threads: int = 1,
        scene: Optional[Scene] = None, q_max: Optional[int] = None) -> RunResult:
    """Evaluate Legacy, RandomHop, BeamSec-Uniform and BeamSec-Opt on shared draws."""
    seed = config.seed if seed is None else seed
    if seed is None:
        raise ValueError("a root seed is required")
    scene = scene or build_scene(config)
    hop = Scheme(Variant.RANDOM_HOP, config.schemes.random_hop_paths)
    pair_sets = {
        Variant.LEGACY: scheme_pairs(scene, Scheme(Variant.LEGACY), seed),
        Variant.RANDOM_HOP: scheme_pairs(scene, hop, seed),
    }
    pair_sets[Variant.BEAMSEC_UNIFORM] = scheme_pairs(scene, Scheme(Variant.BEAMSEC_UNIFORM), seed)
    pair_sets[Variant.BEAMSEC_OPT] = pair_sets[Variant.BEAMSEC_UNIFORM]

    # one evaluation over the union of distinct beams; every scheme reads its own columns
    groups = [Variant.LEGACY, Variant.RANDOM_HOP, Variant.BEAMSEC_UNIFORM]
    beams, spans, start = [], {}, 0
    for v in groups:
        beams.extend(p.tx_beam for p in pair_sets[v])
        spans[v] = slice(start, start + len(pair_sets[v]))
        start += len(pair_sets[v])
    spans[Variant.BEAMSEC_OPT] = spans[Variant.BEAMSEC_UNIFORM]

    ens = scene.ensemble
    ens_seed = derive_seed(seed, STREAM_ENSEMBLE)
    leak_seed = derive_seed(seed, STREAM_LEAKAGE)
    worst = ens.capacities(beams, scene.kind, scene.noise, ens_seed, threads=threads).max(axis=0)
    trials = ens.capacities(beams, scene.kind, scene.noise, leak_seed,
                            n=config.secrecy.leakage_trials, threads=threads)

    q_max = config.colluding.q_max if q_max is None else q_max
    measured = config.schemes.measured
    if measured is not None and any(not 0 <= i < len(ens) for i in measured):
        raise PipelineError(f"measured locations {measured} outside the {len(ens)}-point grid")
    results, curves = {}, {}
    for v in VARIANTS:
        pairs = pair_sets[v]
        c_b = bob_capacities(scene, pairs)
        w = worst[:, spans[v]]
        csl = secrecy_csl(c_b, w)
        try:
            alloc = _allocate(v, csl, measured)
        except Exception as exc:
            raise PipelineError(f"scheme {v.value}: allocation failed: {exc}") from exc
        inst = instantaneous_secrecy(alloc, c_b, trials[:, :, spans[v]])
        report = SecrecyReport.build(alloc, c_b, csl, inst, config.secrecy.rate_step)
        results[v] = SchemeResult(Scheme(v, hop.hop_paths) if v is Variant.RANDOM_HOP else Scheme(v),
                                  pairs, alloc, report, w, _equivocation(scene, c_b, w, seed))
        c = config.colluding
        curves[v] = colluding_curve(alloc, c_b, w, q_max, c.exhaustive_limit, c.sampled_subsets,
                                    derive_seed(seed, STREAM_SUBSETS))
    return RunResult(seed, config.digest(), ens.digest(ens_seed), ens.locations, results, curves,
                     colluding_protocol(config, len(ens)), scene.acp, scene.tau_acp)


def colluding_sweep(config: ExperimentConfig, q_max: int, seed: Optional[int] = None,
                    threads: int = 1) -> dict:
    """Colluding curve per scheme for Q = 1..q_max."""
    return run(config, seed, threads, q_max=q_max).colluding


def improvement(new: float, base: float) -> Optional[float]:
    """Relative improvement (new - base) / base; None when base is zero and new is not."""
    if new == base:
        return 0.0
    if base == 0:
        return None
    return (new - base) / base


def compare(results: Union[RunResult, Sequence[RunResult]]) -> dict:
    """Per-scheme rates (averaged over runs) and pairwise relative improvements."""
    runs = [results] if isinstance(results, RunResult) else list(results)
    if not runs:
        raise ValueError("nothing to compare")
    table: dict = {"runs": len(runs), "seeds": [r.seed for r in runs], "schemes": {},
                   "improvements": {}}
    for v in VARIANTS:
        entry = {
            "absolute_rate": float(np.mean([r[v].report.absolute_rate for r in runs])),
            "mean_rate": float(np.mean([r[v].report.mean_rate for r in runs])),
            "zero_leakage_rate": float(np.mean([r[v].zero_leakage_rate for r in runs])),
        }
        if len(runs) == 1:
            rep = runs[0][v].report
            entry["leakage"] = {"rates": _floats(rep.leakage_rates),
                                "probabilities": _floats(rep.leakage)}
        table["schemes"][v.value] = entry
    for i, new in enumerate(VARIANTS):
        for base in VARIANTS[:i]:
            a, b = table["schemes"][new.value], table["schemes"][base.value]
            table["improvements"][f"{new.value}_vs_{base.value}"] = {
                m: improvement(a[m], b[m]) for m in ("absolute_rate", "mean_rate")
            }
    return table


def heatmap_rows(result: RunResult) -> list[tuple[float, float, str, str, float]]:
    """Flat (x, y, scheme, metric, value) rows for every location and scheme."""
    rows = []
    for v, r in result.schemes.items():
        for i, p in enumerate(result.locations):
            rows.append((p.x, p.y, v.value, "secrecy_rate", float(r.report.location_rates[i])))
            rows.append((p.x, p.y, v.value, "eve_capacity_max", float(np.max(r.worst_eve[i]))))
            if r.equivocation is not None:
                rows.append((p.x, p.y, v.value, "equivocation", float(r.equivocation[i])))
    return rows

