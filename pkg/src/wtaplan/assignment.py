"""Binary assignment model over (farm, PIP) candidates and its exact solver.

One 0/1 variable per feasible (farm, PIP) candidate: weapons within a farm are
interchangeable, so the per-missile index collapses.  The objective is

    sum_t s_t + max_t s_t,    s_t = value_log(t) - decrement * (weapons on t)

with the max term carried by an epigraph variable ``z >= s_t`` in the LP
export.  Every constraint other than the per-target and per-farm caps is a
pairwise conflict ``theta_a + theta_b <= 1``.
"""
from __future__ import annotations

import heapq
import itertools
import math
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .interference import PHYSICAL, SEEKER, CandidateId, InterferenceTable
from .pips import PipSet
from .scenario import Scenario

DELAY = "delay"
SHARED_PIP = "pip"
CONFLICT_KINDS = (SHARED_PIP, DELAY, PHYSICAL, SEEKER)


class ModelError(ValueError):
    pass


@dataclass
class AssignmentModel:
    variables: list[CandidateId]
    target_ids: list[str]
    farm_ids: list[str]
    launch_times: list[float]
    impact_times: list[float]
    value_log: list[float]              # per target, log of initial value
    max_per_target: list[int]           # n_t
    magazine: list[int | None]          # per farm, None = unlimited
    launch_delay: list[float]           # per farm
    conflicts: dict[tuple[int, int], frozenset[str]] = field(default_factory=dict)
    decrement: float = 1.0              # -log(1 - kill probability) per weapon

    def __post_init__(self):
        tpos = {t: i for i, t in enumerate(self.target_ids)}
        fpos = {f: i for i, f in enumerate(self.farm_ids)}
        self.var_target = [tpos[v.target_id] for v in self.variables]
        self.var_farm = [fpos[v.farm_id] for v in self.variables]
        self._index = {v: i for i, v in enumerate(self.variables)}
        for t, (v0, cap) in enumerate(zip(self.value_log, self.max_per_target)):
            if v0 - self.decrement * cap < -1e-9:
                raise ModelError(
                    f"target {self.target_ids[t]}: {cap} weapons would drive its remaining "
                    f"log value below zero"
                )

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def index(self, c: CandidateId) -> int:
        return self._index[c]

    def groups_by_target(self) -> list[list[int]]:
        out = [[] for _ in self.target_ids]
        for i, t in enumerate(self.var_target):
            out[t].append(i)
        return out

    def groups_by_farm(self) -> list[list[int]]:
        out = [[] for _ in self.farm_ids]
        for i, f in enumerate(self.var_farm):
            out[f].append(i)
        return out

    def conflict_pairs(self, kind: str | None = None) -> list[tuple[int, int]]:
        return sorted(p for p, kinds in self.conflicts.items() if kind is None or kind in kinds)

    def indices(self, selection: Iterable) -> list[int]:
        return sorted(self._index[s] if isinstance(s, CandidateId) else int(s) for s in selection)


def build_model(
    pip_set: PipSet,
    interference_table: InterferenceTable | None,
    scenario: Scenario,
) -> AssignmentModel:
    """Variables for feasible candidates plus all pairwise conflicts.

    Conflict kinds: ``pip`` (two farms on one PIP), ``delay`` (same farm,
    launch times closer than its launch delay), and the interference kinds
    from the table.  ``interference_table=None`` builds the model without
    interference constraints.
    """
    farms = {f.id: f for f in scenario.weapon_farms}
    if list(farms) != pip_set.farm_ids:
        raise ModelError(f"farm ids differ: scenario {list(farms)} vs PIP set {pip_set.farm_ids}")
    variables, launch, impact = [], [], []
    for f, p in pip_set.feasible_candidates():
        variables.append(CandidateId(f, p.target_id, p.index))
        launch.append(p.farms[f].launch_time)
        impact.append(p.impact_time)
    pos = {v: i for i, v in enumerate(variables)}

    conflicts: dict[tuple[int, int], set[str]] = {}

    def add(i, j, kind):
        conflicts.setdefault((min(i, j), max(i, j)), set()).add(kind)

    by_pip: dict[tuple[str, int], list[int]] = {}
    for i, v in enumerate(variables):
        by_pip.setdefault((v.target_id, v.index), []).append(i)
    for members in by_pip.values():
        for i, j in itertools.combinations(members, 2):
            add(i, j, SHARED_PIP)

    by_farm: dict[str, list[int]] = {}
    for i, v in enumerate(variables):
        by_farm.setdefault(v.farm_id, []).append(i)
    for f, members in by_farm.items():
        members = sorted(members, key=lambda i: (launch[i], i))
        delay = farms[f].launch_delay
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                i, j = members[a], members[b]
                if launch[j] - launch[i] >= delay:
                    break
                add(i, j, DELAY)

    if interference_table is not None:
        missing = [c for c in interference_table.candidates if c not in pos]
        if missing:
            raise ModelError("interference table references unknown candidates: "
                             + ", ".join(map(str, missing[:10])))
        for kind in (PHYSICAL, SEEKER):
            for a, b in interference_table.pairs(kind):
                add(pos[a], pos[b], kind)

    return AssignmentModel(
        variables=variables,
        target_ids=list(pip_set.target_ids),
        farm_ids=list(pip_set.farm_ids),
        launch_times=launch,
        impact_times=impact,
        value_log=[scenario.target_params.value_log] * len(pip_set.target_ids),
        max_per_target=[scenario.max_weapons_per_target] * len(pip_set.target_ids),
        magazine=[farms[f].magazine for f in pip_set.farm_ids],
        launch_delay=[farms[f].launch_delay for f in pip_set.farm_ids],
        conflicts={k: frozenset(v) for k, v in sorted(conflicts.items())},
    )


# --------------------------------------------------------------------------
# objective and feasibility


def objective_from_counts(counts, value_log, decrement: float = 1.0) -> float:
    """Sum plus max of remaining log values given weapons per target."""
    remaining = [v - decrement * k for v, k in zip(value_log, counts)]
    if not remaining:
        return 0.0
    return float(sum(remaining) + max(remaining))


def weapons_per_target(selection: Iterable, model: AssignmentModel) -> list[int]:
    counts = [0] * len(model.target_ids)
    for i in model.indices(selection):
        counts[model.var_target[i]] += 1
    return counts


def evaluate_objective(selection: Iterable, model: AssignmentModel) -> float:
    return objective_from_counts(weapons_per_target(selection, model), model.value_log, model.decrement)


def check_selection(model: AssignmentModel, selection: Iterable) -> list[str]:
    """Every violated constraint, recomputed from launch times and PIP identity.

    Only the interference pairs are read from the model's conflict list; the
    launch-delay, shared-PIP and cap constraints are derived afresh.
    """
    sel = model.indices(selection)
    problems = []
    if len(set(sel)) != len(sel):
        problems.append("duplicate variables selected")
    counts = weapons_per_target(sel, model)
    for t, (k, cap) in enumerate(zip(counts, model.max_per_target)):
        if k > cap:
            problems.append(f"target {model.target_ids[t]}: {k} weapons > cap {cap}")
    for f, mag in enumerate(model.magazine):
        used = sum(1 for i in sel if model.var_farm[i] == f)
        if mag is not None and used > mag:
            problems.append(f"farm {model.farm_ids[f]}: {used} launches > magazine {mag}")
    for i, j in itertools.combinations(sel, 2):
        a, b = model.variables[i], model.variables[j]
        if (a.target_id, a.index) == (b.target_id, b.index):
            problems.append(f"{a} and {b} share a PIP")
        if a.farm_id == b.farm_id:
            gap = abs(model.launch_times[i] - model.launch_times[j])
            if gap < model.launch_delay[model.var_farm[i]]:
                problems.append(f"{a} and {b} launch {gap:.3f} s apart")
        kinds = model.conflicts.get((i, j), frozenset()) & {PHYSICAL, SEEKER}
        for kind in sorted(kinds):
            problems.append(f"{a} and {b}: {kind} interference")
    return problems


@dataclass
class Solution:
    selected: list[CandidateId]
    objective: float
    remaining: dict[str, float]
    schedule: dict[str, list[tuple[float, CandidateId]]]
    nodes: int = 0
    wall_time: float = 0.0
    optimal: bool = True
    bound: float = float("nan")
    gap: float = 0.0

    @property
    def weapons_assigned(self) -> int:
        return len(self.selected)

    def to_tsv(self, model: AssignmentModel) -> str:
        lines = ["farm\ttarget\tpip_index\tlaunch_time\timpact_time"]
        for c in self.selected:
            i = model.index(c)
            lines.append(f"{c.farm_id}\t{c.target_id}\t{c.index}\t"
                         f"{model.launch_times[i]:.6f}\t{model.impact_times[i]:.6f}")
        return "\n".join(lines) + "\n"


def make_solution(model: AssignmentModel, selection: Iterable, **stats) -> Solution:
    sel = model.indices(selection)
    counts = weapons_per_target(sel, model)
    remaining = {
        t: model.value_log[n] - model.decrement * counts[n] for n, t in enumerate(model.target_ids)
    }
    schedule: dict[str, list[tuple[float, CandidateId]]] = {f: [] for f in model.farm_ids}
    for i in sel:
        schedule[model.variables[i].farm_id].append((model.launch_times[i], model.variables[i]))
    for f in schedule:
        schedule[f].sort()
    objective = objective_from_counts(counts, model.value_log, model.decrement)
    return Solution([model.variables[i] for i in sel], objective, remaining, schedule, **stats)


# --------------------------------------------------------------------------
# exhaustive oracle


def brute_force_oracle(model: AssignmentModel, max_vars: int = 24) -> Solution:
    """Enumerate every subset of variables; exact optimum (ties: lowest mask)."""
    n = model.n_vars
    if n > max_vars:
        raise ValueError(f"{n} variables exceeds oracle limit {max_vars}")
    if n == 0:
        return make_solution(model, [], nodes=1)
    pairs = np.array(list(model.conflicts), dtype=np.int64).reshape(-1, 2)
    value = np.asarray(model.value_log, dtype=float)
    best_obj, best_mask = math.inf, 0
    chunk = 1 << min(n, 16)
    shifts = np.arange(n, dtype=np.int64)
    for start in range(0, 1 << n, chunk):
        masks = np.arange(start, start + chunk, dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(bool)
        ok = np.ones(len(masks), dtype=bool)
        for i, j in pairs:
            ok &= ~(bits[:, i] & bits[:, j])
        counts = np.zeros((len(masks), len(value)))
        for t, members in enumerate(model.groups_by_target()):
            if members:
                counts[:, t] = bits[:, members].sum(axis=1)
            ok &= counts[:, t] <= model.max_per_target[t]
        for f, members in enumerate(model.groups_by_farm()):
            if model.magazine[f] is not None and members:
                ok &= bits[:, members].sum(axis=1) <= model.magazine[f]
        rem = value[None, :] - model.decrement * counts
        obj = rem.sum(axis=1) + rem.max(axis=1)
        obj[~ok] = math.inf
        k = int(np.argmin(obj))
        if obj[k] < best_obj - 1e-9:
            best_obj, best_mask = float(obj[k]), int(masks[k])
    return make_solution(model, [i for i in range(n) if best_mask >> i & 1], nodes=1 << n)


# --------------------------------------------------------------------------
# branch and bound


class _Search:
    """Bitset machinery for one solve.

    Internally vertices are renumbered by (farm, launch time, model index) so
    that scanning a free set low-to-high visits each farm's launches in time
    order, which makes the greedy clique cover follow the launch-delay cliques.
    """

    def __init__(self, model: AssignmentModel):
        self.model = model
        n = model.n_vars
        self.order = sorted(range(n), key=lambda i: (model.var_farm[i], model.launch_times[i], i))
        self.rank = {v: r for r, v in enumerate(self.order)}
        self.n = n
        self.tgt = [model.var_target[v] for v in self.order]
        self.farm = [model.var_farm[v] for v in self.order]
        adj = [0] * n
        for i, j in model.conflicts:
            a, b = self.rank[i], self.rank[j]
            adj[a] |= 1 << b
            adj[b] |= 1 << a
        self.adj = adj
        self.tmask = [0] * len(model.target_ids)
        self.fmask = [0] * len(model.farm_ids)
        for r in range(n):
            self.tmask[self.tgt[r]] |= 1 << r
            self.fmask[self.farm[r]] |= 1 << r
        self.cap = list(model.max_per_target)
        self.mag = list(model.magazine)
        self.value = list(model.value_log)
        self.delta = model.decrement
        self.integral = all(float(v).is_integer() for v in self.value) and float(self.delta).is_integer()
        levels = sorted({v - self.delta * k for v, c in zip(self.value, self.cap) for k in range(c + 1)})
        self.levels = levels

    # -- state updates ------------------------------------------------------

    def select(self, r, sel, free, kt, kw):
        t, f = self.tgt[r], self.farm[r]
        sel |= 1 << r
        free &= ~(self.adj[r] | (1 << r))
        kt = kt[:t] + (kt[t] + 1,) + kt[t + 1:]
        kw = kw[:f] + (kw[f] + 1,) + kw[f + 1:]
        if kt[t] >= self.cap[t]:
            free &= ~self.tmask[t]
        if self.mag[f] is not None and kw[f] >= self.mag[f]:
            free &= ~self.fmask[f]
        return sel, free, kt, kw

    def reduce(self, sel, free, kt, kw):
        """Fix to 1 every free vertex that cannot block anything."""
        changed = True
        while changed and free:
            changed = False
            f = free
            while f:
                low = f & -f
                r = low.bit_length() - 1
                f ^= low
                if not (free >> r) & 1 or self.adj[r] & free:
                    continue
                t, w = self.tgt[r], self.farm[r]
                if (free & self.tmask[t]).bit_count() > self.cap[t] - kt[t]:
                    continue
                if self.mag[w] is not None and (free & self.fmask[w]).bit_count() > self.mag[w] - kw[w]:
                    continue
                sel, free, kt, kw = self.select(r, sel, free, kt, kw)
                changed = True
        return sel, free, kt, kw

    def objective(self, kt) -> float:
        return objective_from_counts(kt, self.value, self.delta)

    # -- bound --------------------------------------------------------------

    def cliques(self, free) -> list[int]:
        """Greedy clique cover of the free vertices; returns each clique's target mask."""
        commons: list[int] = []
        targets: list[int] = []
        f = free
        while f:
            low = f & -f
            r = low.bit_length() - 1
            f ^= low
            for c, common in enumerate(commons):
                if common >> r & 1:
                    commons[c] = common & self.adj[r]
                    targets[c] |= 1 << self.tgt[r]
                    break
            else:
                commons.append(self.adj[r])
                targets.append(1 << self.tgt[r])
        return targets

    @staticmethod
    def _assign(clique_targets, caps, owner, load):
        """Augment a clique -> target b-matching in place; returns matched count."""
        n_t = len(caps)

        def augment(c, seen):
            tm = clique_targets[c]
            for t in range(n_t):
                if tm >> t & 1 and not seen[t]:
                    seen[t] = True
                    if load[t] < caps[t]:
                        owner[c] = t
                        load[t] += 1
                        return True
                    for c2, t2 in enumerate(owner):
                        if t2 == t and augment(c2, seen):
                            owner[c] = t
                            return True
            return False

        for c in range(len(clique_targets)):
            if owner[c] < 0:
                augment(c, [False] * n_t)
        return sum(1 for o in owner if o >= 0)

    def bound(self, sel, free, kt, kw) -> float:
        """Admissible lower bound on any completion of this node.

        A completion adds at most one weapon per clique of a clique cover of
        the free set and at most ``cap - k`` per target.  For each candidate
        final max level L, targets above L must receive enough weapons to get
        down to it; the largest such clique->target assignment bounds the
        weapon count, giving ``sum(v) - delta * K + L``.
        """
        if not free:
            return self.objective(kt)
        ctargets = self.cliques(free)
        remaining_cap = [c - k for c, k in zip(self.cap, kt)]
        mag_room = math.inf
        if all(m is not None for m in self.mag):
            mag_room = sum(m - k for m, k in zip(self.mag, kw))
        base = sum(self.value) - self.delta * sum(kt)
        current = [v - self.delta * k for v, k in zip(self.value, kt)]
        best = math.inf
        for level in self.levels:
            if level > max(current) + 1e-9:
                break
            need = [max(0, math.ceil((s - level) / self.delta - 1e-9)) for s in current]
            if any(n > r for n, r in zip(need, remaining_cap)) or sum(need) > mag_room:
                continue
            owner = [-1] * len(ctargets)
            load = [0] * len(need)
            if self._assign(ctargets, need, owner, load) < sum(need):
                continue
            extra = self._assign(ctargets, remaining_cap, owner, load)
            extra = min(extra, mag_room)
            best = min(best, base - self.delta * extra + level)
        if self.integral and best < math.inf:
            best = math.ceil(best - 1e-9)
        return best

    # -- heuristics ---------------------------------------------------------

    def greedy(self, sel, free, kt, kw):
        """Repeatedly take the free vertex on the highest-value target with fewest free conflicts."""
        while free:
            best_key, best_r = None, -1
            f = free
            while f:
                low = f & -f
                r = low.bit_length() - 1
                f ^= low
                t = self.tgt[r]
                key = (-(self.value[t] - self.delta * kt[t]), (self.adj[r] & free).bit_count(), r)
                if best_key is None or key < best_key:
                    best_key, best_r = key, r
            sel, free, kt, kw = self.select(best_r, sel, free, kt, kw)
        return sel, kt

    def branch_vertex(self, free) -> int:
        best_key, best_r = None, -1
        f = free
        while f:
            low = f & -f
            r = low.bit_length() - 1
            f ^= low
            key = (-(self.adj[r] & free).bit_count(), self.order[r])
            if best_key is None or key < best_key:
                best_key, best_r = key, r
        return best_r

    def to_model_indices(self, sel) -> list[int]:
        out = []
        while sel:
            low = sel & -sel
            out.append(self.order[low.bit_length() - 1])
            sel ^= low
        return sorted(out)


def solve_exact(
    model: AssignmentModel,
    max_nodes: int | None = None,
    time_limit: float | None = None,
    node_callback: Callable | None = None,
) -> Solution:
    """Best-first branch and bound over the conflict graph.

    Children are created by fixing the free variable with the most free
    conflicts to 1 (propagating its conflicts and caps) or to 0; ties between
    equal bounds go to the deeper node, then to the 1-branch.  When the node or
    time budget runs out the incumbent is returned with ``optimal=False`` and
    ``gap = objective - best open bound``.  ``node_callback(selected, free,
    bound)`` receives model-index lists for every expanded node (testing aid).
    """
    start = time.perf_counter()
    s = _Search(model)
    n_t, n_f = len(model.target_ids), len(model.farm_ids)
    free = (1 << s.n) - 1
    for t in range(n_t):
        if s.cap[t] <= 0:
            free &= ~s.tmask[t]
    for f in range(n_f):
        if s.mag[f] is not None and s.mag[f] <= 0:
            free &= ~s.fmask[f]
    root = s.reduce(0, free, (0,) * n_t, (0,) * n_f)

    inc_sel, inc_kt = s.greedy(*root)
    incumbent = s.objective(inc_kt)
    tol = 1e-9

    heap: list = []
    seq = itertools.count()
    root_bound = s.bound(*root)
    if root_bound < incumbent - tol:
        heapq.heappush(heap, (root_bound, 0, next(seq), root))
    nodes = 0
    exhausted = False
    while heap:
        if (max_nodes is not None and nodes >= max_nodes) or (
            time_limit is not None and time.perf_counter() - start > time_limit
        ):
            exhausted = True
            break
        bnd, negdepth, _, node = heapq.heappop(heap)
        if bnd >= incumbent - tol:
            heap.clear()
            break
        nodes += 1
        sel, free, kt, kw = node
        if node_callback is not None:
            node_callback(s.to_model_indices(sel), s.to_model_indices(free), bnd)
        r = s.branch_vertex(free)
        one = s.reduce(*s.select(r, sel, free, kt, kw))
        zero = s.reduce(sel, free & ~(1 << r), kt, kw)
        for child in (one, zero):
            value = s.objective(child[2])
            if value < incumbent - tol:
                incumbent, inc_sel, inc_kt = value, child[0], child[2]
            if nodes % 256 == 0 and child[1]:
                g_sel, g_kt = s.greedy(*child)
                g_val = s.objective(g_kt)
                if g_val < incumbent - tol:
                    incumbent, inc_sel, inc_kt = g_val, g_sel, g_kt
            if not child[1]:
                continue
            cb = s.bound(*child)
            if cb < incumbent - tol:
                heapq.heappush(heap, (cb, negdepth - 1, next(seq), child))

    open_bound = min((h[0] for h in heap), default=incumbent) if exhausted else incumbent
    open_bound = min(open_bound, incumbent)
    return make_solution(
        model,
        s.to_model_indices(inc_sel),
        nodes=nodes,
        wall_time=time.perf_counter() - start,
        optimal=not exhausted or not heap,
        bound=open_bound,
        gap=incumbent - open_bound,
    )


# --------------------------------------------------------------------------
# LP export


def _name(prefix: str, *parts) -> str:
    return prefix + "_".join(re.sub(r"[^A-Za-z0-9]", "_", str(p)) for p in parts)


def _terms(coefs_names, width: int = 8) -> str:
    chunks = []
    for n, (c, name) in enumerate(coefs_names):
        sign = "-" if c < 0 else "+"
        term = f"{sign} {abs(c):g} {name}" if abs(c) != 1 else f"{sign} {name}"
        if n == 0 and sign == "+":
            term = term[2:]
        chunks.append(term)
    lines = [" ".join(chunks[i:i + width]) for i in range(0, len(chunks), width)]
    return "\n   ".join(lines)


def model_to_lp(model: AssignmentModel) -> str:
    """CPLEX LP text of the model with explicit remaining-value and epigraph rows."""
    x = [_name("x", i, v.farm_id, v.target_id, v.index) for i, v in enumerate(model.variables)]
    s = [_name("s_", t) for t in model.target_ids]
    out = ["\\ weapon-target assignment over predicted intercept points", "Minimize"]
    out.append(" obj: " + _terms([(1, n) for n in s] + [(1, "z")]))
    out.append("Subject To")
    groups = model.groups_by_target()
    for t, tid in enumerate(model.target_ids):
        terms = [(1, s[t])] + [(model.decrement, x[i]) for i in groups[t]]
        out.append(f" {_name('value_', tid)}: {_terms(terms)} = {model.value_log[t]:g}")
    for t, tid in enumerate(model.target_ids):
        if groups[t]:
            out.append(f" {_name('cap_', tid)}: {_terms([(1, x[i]) for i in groups[t]])} <= {model.max_per_target[t]}")
    for t, tid in enumerate(model.target_ids):
        out.append(f" {_name('epi_', tid)}: z - {s[t]} >= 0")
    for f, members in enumerate(model.groups_by_farm()):
        if model.magazine[f] is not None and members:
            out.append(f" {_name('mag_', model.farm_ids[f])}: {_terms([(1, x[i]) for i in members])} <= {model.magazine[f]}")
    for n, ((i, j), kinds) in enumerate(model.conflicts.items()):
        tag = "_".join(k for k in CONFLICT_KINDS if k in kinds)
        out.append(f" c{n}_{tag}: {x[i]} + {x[j]} <= 1")
    out.append("Bounds")
    for name in s + ["z"]:
        out.append(f" {name} >= 0")
    if x:
        out.append("Binaries")
        out.extend(f" {name}" for name in x)
    out.append("End")
    return "\n".join(out) + "\n"
