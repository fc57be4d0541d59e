"""Genetic search over rule-grid consequents.

Chromosomes are flat consequent vectors (one gene per antecedent cell,
values 1..5).  Fitness replays the most recent simulation snapshots
through the terminal state machine under the candidate grid and counts
handoff initiations and cut connections; lower is better.

Replay semantics: channel occupancy and every other terminal's behavior
are frozen to what the live simulation recorded, so fitness isolates the
candidate's own decisions.  ``ResimFitness`` offers the alternative
full re-simulation semantics behind a config switch.

Fitness is a pure function of (chromosome, window, config), so evaluations
are cache-friendly and could run on parallel workers; the generational
loop itself is a sequential barrier and all random draws come from one
caller-supplied generator stream.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .fuzzy import FuzzySystem
from .world import State

__all__ = [
    "EmptyHistoryError",
    "EvolverConfig",
    "Chromosome",
    "validate_chromosome",
    "random_chromosome",
    "init_population",
    "tournament_select",
    "one_point_crossover",
    "mutate_random_reset",
    "ReplayFitness",
    "ResimFitness",
    "evolve",
    "RuleEvolver",
]

Chromosome = tuple[int, ...]

_GENE_LO, _GENE_HI = 1, 5
_KEY_BASE = 6  # gene digits are 1..5; base 6 keeps projection keys injective


class EmptyHistoryError(ValueError):
    """Fitness was asked to score an empty history window."""


@dataclass(frozen=True)
class EvolverConfig:
    population_size: int = 50
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    tournament_size: int = 10
    generations: int = 20
    invocation_period: float = 4
    window_length: int = 4
    weight_handoff: float = 1.0
    weight_cut: float = 1.0
    full_resim: bool = False

    def __post_init__(self) -> None:
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not 0 <= self.crossover_prob <= 1:
            raise ValueError("crossover_prob must be in [0,1]")
        if not 0 <= self.mutation_prob <= 1:
            raise ValueError("mutation_prob must be in [0,1]")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in 1..population_size")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.invocation_period <= 0:
            raise ValueError("invocation_period must be positive")
        if self.window_length < 1:
            raise ValueError("window_length must be >= 1")
        if self.weight_handoff < 0 or self.weight_cut < 0:
            raise ValueError("fitness weights must be >= 0")


def validate_chromosome(genes: Sequence[int], length: int) -> None:
    if len(genes) != length:
        raise ValueError(f"chromosome length {len(genes)} != {length}")
    bad = [g for g in genes if not _GENE_LO <= g <= _GENE_HI]
    if bad:
        raise ValueError(f"genes outside {{1..5}}: {bad}")


def random_chromosome(length: int, rng: np.random.Generator) -> Chromosome:
    return tuple(int(g) for g in rng.integers(_GENE_LO, _GENE_HI + 1, size=length))


def init_population(
    seed_chromosome: Sequence[int],
    cfg: EvolverConfig,
    rng: np.random.Generator,
) -> list[Chromosome]:
    """Seed grid first, the rest drawn uniformly gene by gene."""
    seed = tuple(int(g) for g in seed_chromosome)
    validate_chromosome(seed, len(seed))
    pop: list[Chromosome] = [seed]
    for _ in range(cfg.population_size - 1):
        pop.append(random_chromosome(len(seed), rng))
    return pop


def tournament_select(
    population: Sequence[Chromosome],
    fitnesses: Sequence[float],
    k: int,
    rng: np.random.Generator,
) -> Chromosome:
    """Min-fitness winner among k members sampled without replacement.

    Ties resolve to the lowest population index.
    """
    n = len(population)
    if k > n:
        raise ValueError(f"tournament size {k} > population {n}")
    # Floyd's sampling: uniform over k-subsets, one bulk draw.
    us = rng.random(k)
    sampled: set[int] = set()
    for i, j in enumerate(range(n - k, n)):
        t = int(us[i] * (j + 1))
        sampled.add(t if t not in sampled else j)
    best = min(sampled, key=lambda i: (fitnesses[i], i))
    return population[best]


def one_point_crossover(
    p1: Chromosome,
    p2: Chromosome,
    prob: float,
    rng: np.random.Generator,
) -> tuple[Chromosome, Chromosome]:
    """Suffix swap at a uniform cut point, applied with probability ``prob``."""
    if rng.random() >= prob or len(p1) < 2:
        return tuple(p1), tuple(p2)
    cut = int(rng.integers(1, len(p1)))
    return p1[:cut] + p2[cut:], p2[:cut] + p1[cut:]


def mutate_random_reset(
    genes: Chromosome,
    pm: float,
    rng: np.random.Generator,
) -> Chromosome:
    """Each gene independently redrawn uniformly (possibly unchanged) w.p. pm."""
    mask = rng.random(len(genes)) < pm
    if not mask.any():
        return tuple(genes)
    arr = np.array(genes, dtype=np.int64)
    arr[mask] = rng.integers(_GENE_LO, _GENE_HI + 1, size=int(mask.sum()))
    return tuple(arr.tolist())


# Replay region codes for a crisp value v against (s_min, s_th):
#   0: v < s_min    1: v == s_min    2: s_min < v < s_th    3: v >= s_th
_BELOW_MIN, _AT_MIN, _MID, _ABOVE_TH = 0, 1, 2, 3


class _Site:
    """One (time unit, terminal, station) decision point.

    ``fired_idx``/``fired_w`` are the positively-firing grid cells and
    their weights, fixed by the recorded inputs; ``regions`` memoizes the
    threshold region per gene projection.  Sites persist for as long as
    their source record does, so the memo is shared by every window (and
    every candidate grid) that touches the same time unit.
    """

    __slots__ = ("fired_idx", "fired_w", "regions")

    def __init__(self, fired_idx: list[int], fired_w: list[float]) -> None:
        self.fired_idx = fired_idx
        self.fired_w = fired_w
        self.regions: dict[tuple[int, ...], int] = {}


class _WindowPrep:
    """Per-window replay arrays plus the decision sites of each unit."""

    def __init__(self, records, fitness: "ReplayFitness") -> None:
        system = fitness.system
        self.n_units = len(records)
        self.n_mts = len(records[0].snapshots)
        self.n_stations = len(records[0].snapshots[0].dist_ratio)
        U, M, S = self.n_units, self.n_mts, self.n_stations
        self.ratio = np.array(
            [[snap.dist_ratio for snap in rec.snapshots] for rec in records]
        )
        self.chan = np.array(
            [[snap.chan_norm for snap in rec.snapshots] for rec in records]
        )
        self.covered = self.ratio > 0.0
        self.dn = np.clip(self.ratio, 0.0, 1.0)
        # Deepest covering station per (unit, terminal), channels ignored;
        # argmax takes the first maximum, i.e. the lowest station id on ties.
        scores = np.where(self.covered, self.dn, -1.0)
        cand = scores.argmax(axis=2)
        self.cand = np.where(scores.max(axis=2) > 0.0, cand, -1)
        first = records[0].snapshots
        self.init_state = np.array([int(s.state) for s in first])
        self.init_serving = np.array([s.serving for s in first])
        self.init_target = np.array([s.target for s in first])
        self.init_dwell = np.array([s.dwell for s in first])

        # Materialize every covered decision site: fuzzified inputs do not
        # depend on the candidate grid, only their gene mapping does.
        self._sites: dict[tuple[int, int], _Site] = {}
        self._site_lut = np.full((U, M * S), -1, dtype=np.int64)
        sites_by_gid: list[_Site] = []
        maxf = 1
        for u, rec in enumerate(records):
            for m in range(M):
                v_deg = None
                for s in range(S):
                    if not self.covered[u, m, s]:
                        continue
                    cached = fitness._site_cache.get((rec.t, m, s))
                    if cached is not None and cached[0] is rec:
                        site = cached[1]
                    else:
                        if v_deg is None:
                            v_deg = system.input_vars[0].fuzzify(rec.snapshots[m].velocity)
                        degs = [v_deg, system.input_vars[1].fuzzify(float(self.dn[u, m, s]))]
                        if fitness.uses_channels:
                            degs.append(
                                system.input_vars[2].fuzzify(float(self.chan[u, m, s]))
                            )
                        w = system.cell_weights(degs)
                        fired = np.flatnonzero(w > 0.0)
                        site = _Site([int(i) for i in fired], [float(v) for v in w[fired]])
                        fitness._site_cache[(rec.t, m, s)] = (rec, site)
                    self._sites[(u, m * S + s)] = site
                    self._site_lut[u, m * S + s] = len(sites_by_gid)
                    sites_by_gid.append(site)
                    maxf = max(maxf, len(site.fired_idx))
        self.sites_by_gid = sites_by_gid
        self.max_fired = maxf
        self.fast_keys = maxf <= 24  # base-6 projection keys fit in int64
        if self.fast_keys:
            self._powers = _KEY_BASE ** np.arange(maxf, dtype=np.int64)
            self._site_stride = int(_KEY_BASE) ** maxf
            pad = np.zeros((len(sites_by_gid), maxf), dtype=np.int64)
            for gid, site in enumerate(sites_by_gid):
                pad[gid, : len(site.fired_idx)] = site.fired_idx
                pad[gid, len(site.fired_idx):] = site.fired_idx[0]
            self._padded_idx = pad
        # Transient first-level memo: combined (site, padded projection) key
        # -> region, read through to the persistent per-site memos.
        self.regions: dict[int, int] = {}
        support: set[int] = set()
        for site in sites_by_gid:
            support.update(site.fired_idx)
        self.support = tuple(sorted(support))

    def site(self, u: int, m: int, s: int) -> _Site:
        return self._sites[(u, m * self.n_stations + s)]


def _window_records(window):
    recs = getattr(window, "records", window)
    return tuple(recs)


def _window_checkpoint(window):
    return getattr(window, "checkpoint", None)


class ReplayFitness:
    """Weighted handoff + cut count from a frozen-window replay.

    The scalar call is the reference implementation; :meth:`batch`
    evaluates a whole population through the same cached decision path
    and is bit-for-bit equivalent.
    """

    def __init__(
        self,
        system: FuzzySystem,
        s_min: float,
        s_th: float,
        dwell: int = 2,
        weight_handoff: float = 1.0,
        weight_cut: float = 1.0,
        uses_channels: Optional[bool] = None,
    ) -> None:
        if not 0 <= s_min < s_th <= 1:
            raise ValueError(f"need 0 <= s_min < s_th <= 1, got {s_min}, {s_th}")
        self.system = system
        self.s_min = float(s_min)
        self.s_th = float(s_th)
        self.dwell = int(dwell)
        self.weight_handoff = float(weight_handoff)
        self.weight_cut = float(weight_cut)
        self.uses_channels = (
            len(system.input_vars) >= 3 if uses_channels is None else uses_channels
        )
        self._sup_lo = tuple(t.support[0] for t in system.output_var.terms)
        self._sup_hi = tuple(t.support[1] for t in system.output_var.terms)
        self._preps: dict[int, tuple[tuple, _WindowPrep]] = {}
        # (time unit, terminal, station) -> (source record, site); keyed by
        # absolute unit so consecutive overlapping windows share the sites,
        # with the record identity guarding against unrelated windows that
        # happen to reuse unit numbers.
        self._site_cache: dict[tuple[int, int, int], tuple] = {}

    def _prep(self, records: tuple) -> _WindowPrep:
        cached = self._preps.get(id(records))
        if cached is not None and cached[0] is records:
            return cached[1]
        prep = _WindowPrep(records, self)
        if len(self._preps) >= 4:
            self._preps.pop(next(iter(self._preps)))
        self._preps[id(records)] = (records, prep)
        return prep

    def window_support(self, window) -> tuple[int, ...]:
        """Grid cells that can fire anywhere in the window.

        Genes outside this set cannot influence fitness, so populations may
        be deduplicated on this projection.
        """
        records = _window_records(window)
        if not records:
            raise EmptyHistoryError("history window is empty")
        return self._prep(records).support

    def _resolve_digits(self, site: _Site, digits: tuple[int, ...]) -> int:
        """Threshold region of one site under the genes at its fired cells."""
        region = site.regions.get(digits)
        if region is not None:
            return region
        s5 = [0.0] * self.system.n_output_terms
        for w, d in zip(site.fired_w, digits):
            t = d - 1
            if w > s5[t]:
                s5[t] = w
        # The centroid lies strictly inside the activated support hull, so
        # these bounds settle most threshold comparisons without defuzzifying.
        lo = min(l for l, v in zip(self._sup_lo, s5) if v > 0.0)
        hi = max(h for h, v in zip(self._sup_hi, s5) if v > 0.0)
        if hi <= self.s_min:
            region = _BELOW_MIN
        elif lo >= self.s_th:
            region = _ABOVE_TH
        else:
            v = self.system.crisp_from_strengths(s5)
            if v < self.s_min:
                region = _BELOW_MIN
            elif v == self.s_min:
                region = _AT_MIN
            elif v < self.s_th:
                region = _MID
            else:
                region = _ABOVE_TH
        site.regions[digits] = region
        return region

    def _resolve(self, site: _Site, genes: Sequence[int]) -> int:
        return self._resolve_digits(site, tuple(genes[i] for i in site.fired_idx))

    def _select_target(self, prep: _WindowPrep, u: int, m: int, exclude: int) -> int:
        """Recorded-snapshot mirror of live target selection (free channel
        required, deepest coverage wins, lowest id on ties)."""
        best = -1
        best_dn = 0.0
        for s in range(prep.n_stations):
            if s == exclude:
                continue
            if not prep.covered[u, m, s]:
                continue
            if prep.chan[u, m, s] <= 0.0:
                continue
            dn = prep.dn[u, m, s]
            if dn > best_dn:
                best, best_dn = s, dn
        return best

    def __call__(self, genes: Sequence[int], window) -> float:
        records = _window_records(window)
        if not records:
            raise EmptyHistoryError("history window is empty")
        genes = tuple(genes)
        prep = self._prep(records)
        ho = 0
        cuts = 0
        for m in range(prep.n_mts):
            st = int(prep.init_state[m])
            sv = int(prep.init_serving[m])
            tg = int(prep.init_target[m])
            dw = int(prep.init_dwell[m])
            for u in range(prep.n_units):
                if st != State.DISCONNECT and prep.ratio[u, m, sv] <= 0.0:
                    cuts += 1
                    st, sv, tg, dw = State.DISCONNECT, -1, -1, 0
                    continue
                if st == State.CONNECT:
                    region = self._resolve(prep.site(u, m, sv), genes)
                    if region == _BELOW_MIN:
                        cuts += 1
                        st, sv = State.DISCONNECT, -1
                    elif region != _ABOVE_TH:
                        tsel = self._select_target(prep, u, m, exclude=sv)
                        if tsel >= 0:
                            ho += 1
                            tg, st, dw = tsel, State.HANDOVER, self.dwell
                    continue
                if st == State.HANDOVER:
                    dw -= 1
                    if dw == 0:
                        sv, tg, st = tg, -1, State.CONNECT
                    continue
                cand = int(prep.cand[u, m])
                if cand >= 0:
                    region = self._resolve(prep.site(u, m, cand), genes)
                    if region >= _MID and prep.chan[u, m, cand] > 0.0:
                        sv, st = cand, State.CONNECT
        return self.weight_handoff * ho + self.weight_cut * cuts

    def batch(self, population: Sequence[Sequence[int]], window) -> np.ndarray:
        """Fitness of every chromosome, replayed in lockstep across the
        population with vectorized transitions.  Decisions resolve through
        the same region memo as the scalar path, so results are identical.
        """
        records = _window_records(window)
        if not records:
            raise EmptyHistoryError("history window is empty")
        pop = [tuple(g) for g in population]
        P = len(pop)
        if P == 0:
            return np.zeros(0)
        prep = self._prep(records)
        if not prep.fast_keys:
            return np.array([self(g, window) for g in pop])
        M, S = prep.n_mts, prep.n_stations
        G = np.array(pop, dtype=np.int64)
        st = np.broadcast_to(prep.init_state, (P, M)).copy()
        sv = np.broadcast_to(prep.init_serving, (P, M)).copy()
        tg = np.broadcast_to(prep.init_target, (P, M)).copy()
        dw = np.broadcast_to(prep.init_dwell, (P, M)).copy()
        ho = np.zeros(P, dtype=np.int64)
        cuts = np.zeros(P, dtype=np.int64)
        m_grid = np.broadcast_to(np.arange(M), (P, M))
        s_range = np.arange(S)
        for u in range(prep.n_units):
            ratio_u = prep.ratio[u]
            chan_u = prep.chan[u]
            dn_u = prep.dn[u]
            covered_u = prep.covered[u]
            cand_u = prep.cand[u]
            connectedish = st != State.DISCONNECT
            r_sv = ratio_u[m_grid, np.where(sv >= 0, sv, 0)]
            forced = connectedish & (r_sv <= 0.0)
            if forced.any():
                cuts += forced.sum(axis=1)
                st = np.where(forced, State.DISCONNECT, st)
                sv = np.where(forced, -1, sv)
                tg = np.where(forced, -1, tg)
                dw = np.where(forced, 0, dw)

            # Branch membership is fixed by the state at unit start, so one
            # joint region lookup serves both value-driven branches.
            is_conn = (st == State.CONNECT) & ~forced
            is_disc = (st == State.DISCONNECT) & ~forced & (cand_u >= 0)[None, :]
            reg = self._regions_for(
                prep, u, is_conn | is_disc, np.where(is_conn, sv, cand_u[None, :]), G
            )

            do_cut = is_conn & (reg == _BELOW_MIN)
            if do_cut.any():
                cuts += do_cut.sum(axis=1)
                st = np.where(do_cut, State.DISCONNECT, st)
                sv = np.where(do_cut, -1, sv)
            mid = is_conn & (reg >= _AT_MIN) & (reg <= _MID)
            if mid.any():
                eligible = (covered_u & (chan_u > 0.0))[None, :, :] & (
                    s_range[None, None, :] != sv[:, :, None]
                )
                scores = np.where(eligible, dn_u[None, :, :], -1.0)
                tsel = scores.argmax(axis=2)
                found = np.take_along_axis(scores, tsel[..., None], 2)[..., 0] > 0.0
                do_ho = mid & found
                ho += do_ho.sum(axis=1)
                tg = np.where(do_ho, tsel, tg)
                st = np.where(do_ho, State.HANDOVER, st)
                dw = np.where(do_ho, self.dwell, dw)

            is_ho = (st == State.HANDOVER) & ~forced & ~is_conn
            if is_ho.any():
                dw = np.where(is_ho, dw - 1, dw)
                done = is_ho & (dw == 0)
                sv = np.where(done, tg, sv)
                tg = np.where(done, -1, tg)
                st = np.where(done, State.CONNECT, st)

            if is_disc.any():
                chan_ok = chan_u[np.arange(M), np.where(cand_u >= 0, cand_u, 0)] > 0.0
                do_conn = is_disc & (reg >= _MID) & chan_ok[None, :]
                sv = np.where(do_conn, cand_u[None, :], sv)
                st = np.where(do_conn, State.CONNECT, st)
        return self.weight_handoff * ho + self.weight_cut * cuts

    def _regions_for(
        self,
        prep: _WindowPrep,
        u: int,
        mask: np.ndarray,
        station: np.ndarray,
        G: np.ndarray,
    ) -> np.ndarray:
        """Region codes for every masked (chromosome, terminal) pair at its
        per-pair station; -1 where the mask is off."""
        P, M = mask.shape
        out = np.full((P, M), -1, dtype=np.int64)
        if not mask.any():
            return out
        p_idx, m_idx = np.nonzero(mask)
        s_idx = station[p_idx, m_idx]
        gids = prep._site_lut[u, m_idx * prep.n_stations + s_idx]
        digits = G[p_idx[:, None], prep._padded_idx[gids]]
        keys = gids * prep._site_stride + digits[:, ::-1] @ prep._powers
        uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        regions = np.empty(len(uniq), dtype=np.int64)
        prep_memo = prep.regions
        for j, key in enumerate(uniq):
            key = int(key)
            region = prep_memo.get(key)
            if region is None:
                k = int(first[j])
                site = prep.sites_by_gid[int(gids[k])]
                row = G[p_idx[k]]
                region = self._resolve_digits(
                    site, tuple(int(row[i]) for i in site.fired_idx)
                )
                prep_memo[key] = region
            regions[j] = region
        out[p_idx, m_idx] = regions[inverse]
        return out


class _StaticDecider:
    """Decide-only adapter binding a consequent vector to a fuzzy system."""

    def __init__(self, system: FuzzySystem, genes: Chromosome, uses_channels: bool) -> None:
        self.system = system
        self.genes = genes
        self.uses_channels = uses_channels

    def decide(self, velocity: float, dist_norm: float, chan_norm: float) -> float:
        inputs = (velocity, dist_norm, chan_norm) if self.uses_channels else (velocity, dist_norm)
        return self.system.compute(self.genes, inputs)


class ResimFitness:
    """Full re-simulation fitness: replays the window on a world checkpoint,
    so the candidate's decisions also feed back into channel occupancy and
    the other terminals' environment."""

    def __init__(
        self,
        system: FuzzySystem,
        weight_handoff: float = 1.0,
        weight_cut: float = 1.0,
        uses_channels: Optional[bool] = None,
    ) -> None:
        self.system = system
        self.weight_handoff = float(weight_handoff)
        self.weight_cut = float(weight_cut)
        self.uses_channels = (
            len(system.input_vars) >= 3 if uses_channels is None else uses_channels
        )

    def __call__(self, genes: Sequence[int], window) -> float:
        records = _window_records(window)
        if not records:
            raise EmptyHistoryError("history window is empty")
        checkpoint = _window_checkpoint(window)
        if checkpoint is None:
            raise EmptyHistoryError("full re-simulation needs a recorded checkpoint")
        world = checkpoint.clone_state()
        probe = _StaticDecider(self.system, tuple(genes), self.uses_channels)
        for _ in records:
            world.step(probe)
        ho = sum(1 for e in world.events if e.kind == "HandoffInitiated")
        cuts = sum(1 for e in world.events if e.kind == "ConnectionCut")
        return self.weight_handoff * ho + self.weight_cut * cuts


def evolve(
    population: list[Chromosome],
    window,
    fitness: Callable[[Sequence[int], object], float],
    cfg: EvolverConfig,
    rng: np.random.Generator,
    on_generation: Optional[Callable[[int, float], None]] = None,
) -> Chromosome:
    """Generational loop with elitism of one; returns the all-time best.

    ``population`` is evolved in place so the caller's evolver state
    persists across invocations.  Offspring are built select -> crossover
    -> mutate; the incumbent best replaces the first offspring unchanged,
    which makes the per-generation best fitness non-increasing.
    """
    records = _window_records(window)
    if not records:
        raise EmptyHistoryError("history window is empty")
    size = cfg.population_size
    if len(population) != size:
        raise ValueError(f"population size {len(population)} != configured {size}")

    project = None
    supp_fn = getattr(fitness, "window_support", None)
    if supp_fn is not None:
        support = supp_fn(window)
        if len(support) >= 2:
            project = operator.itemgetter(*support)
    batch_fn = getattr(fitness, "batch", None)
    memo: dict[Chromosome, float] = {}

    def evaluate(pop: Sequence[Chromosome]) -> list[float]:
        keys = [project(g) if project is not None else g for g in pop]
        pending: dict[Chromosome, Chromosome] = {}
        for key, genes in zip(keys, pop):
            if key not in memo and key not in pending:
                pending[key] = genes
        if pending:
            reps = list(pending.values())
            vals = batch_fn(reps, window) if batch_fn else [fitness(g, window) for g in reps]
            for key, val in zip(pending.keys(), vals):
                memo[key] = float(val)
        return [memo[key] for key in keys]

    fits = evaluate(population)
    best_i = min(range(size), key=lambda i: (fits[i], i))
    best, best_fit = population[best_i], fits[best_i]
    if on_generation is not None:
        on_generation(0, best_fit)

    for gen in range(cfg.generations):
        offspring: list[Chromosome] = []
        while len(offspring) < size:
            a = tournament_select(population, fits, cfg.tournament_size, rng)
            b = tournament_select(population, fits, cfg.tournament_size, rng)
            c1, c2 = one_point_crossover(a, b, cfg.crossover_prob, rng)
            offspring.append(mutate_random_reset(c1, cfg.mutation_prob, rng))
            if len(offspring) < size:
                offspring.append(mutate_random_reset(c2, cfg.mutation_prob, rng))
        offspring[0] = best
        population[:] = offspring
        fits = evaluate(population)
        gen_i = min(range(size), key=lambda i: (fits[i], i))
        if fits[gen_i] < best_fit:
            best, best_fit = population[gen_i], fits[gen_i]
        if on_generation is not None:
            on_generation(gen + 1, best_fit)
    return best


class RuleEvolver:
    """Owns the population, generator stream, and fitness for one policy."""

    def __init__(
        self,
        seed_chromosome: Sequence[int],
        cfg: EvolverConfig,
        fitness: Callable[[Sequence[int], object], float],
        rng: np.random.Generator,
    ) -> None:
        self.cfg = cfg
        self.fitness = fitness
        self.rng = rng
        self.population = init_population(seed_chromosome, cfg, rng)

    def evolve(self, window, on_generation=None) -> Chromosome:
        return evolve(self.population, window, self.fitness, self.cfg, self.rng,
                      on_generation=on_generation)
