"""Pairwise 2AFC judgments to absolute complexity scores.

Gaussian skill inference (moment-matched win/loss updates, no draws)
plus information-driven active pair selection and a correlation-based
multi-stage stopping rule. All state mutation flows through a single
:class:`StudyRanker` instance; snapshots are plain dicts safe to share.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm, pearsonr, spearmanr


class NotEnoughImages(ValueError):
    pass


class UnknownImage(KeyError):
    pass


class NoTrials(RuntimeError):
    pass


@dataclass(frozen=True)
class RankingConfig:
    mu0: float = 25.0
    sigma0: float = 25.0 / 3.0
    beta: float = 25.0 / 6.0
    tau: float = 25.0 / 300.0
    stage_pair_count: int = 79
    raters_per_stage: int = 22
    convergence_r: float = 0.95
    convergence_stages: int = 3

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.stage_pair_count < 1:
            raise ValueError("stage_pair_count must be >= 1")


@dataclass(frozen=True)
class RatingState:
    image_id: str
    mu: float
    sigma: float
    comparisons: int = 0


@dataclass(frozen=True)
class TrialRecord:
    trial_id: str
    stage: int
    rater_id: str
    pair: tuple
    choice: str
    latency: float
    is_attention_check: bool = False
    timestamp: float = 0.0

    def __post_init__(self):
        if self.choice not in self.pair:
            raise ValueError("choice must be one of the pair")
        if self.latency <= 0:
            raise ValueError("latency must be positive")

    def to_json(self) -> str:
        return json.dumps(
            {
                "trial_id": self.trial_id,
                "stage": self.stage,
                "rater_id": self.rater_id,
                "pair": list(self.pair),
                "choice": self.choice,
                "latency": self.latency,
                "is_attention_check": self.is_attention_check,
                "timestamp": self.timestamp,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        d = json.loads(line)
        return cls(
            trial_id=d["trial_id"],
            stage=d["stage"],
            rater_id=d["rater_id"],
            pair=tuple(d["pair"]),
            choice=d["choice"],
            latency=d["latency"],
            is_attention_check=d["is_attention_check"],
            timestamp=d["timestamp"],
        )


@dataclass
class StageReport:
    stage: int
    scores: dict
    pearson_to_previous: float
    spearman_to_previous: float
    valid_trials: int
    converged: bool


def _v_w(t: float) -> tuple[float, float]:
    """Truncated-Gaussian correction terms v(t) and w(t)."""
    denom = norm.cdf(t)
    if denom < 1e-300:
        # deep tail: v(t) ~ -t, w(t) ~ 1
        return -t, 1.0
    v = norm.pdf(t) / denom
    return v, v * (v + t)


def update_pair(
    winner: RatingState, loser: RatingState, cfg: RankingConfig
) -> tuple[RatingState, RatingState]:
    """Moment-matched Gaussian update for one no-draw comparison."""
    if winner.image_id == loser.image_id:
        raise ValueError("an image cannot be compared with itself")
    var_w = winner.sigma**2 + cfg.tau**2
    var_l = loser.sigma**2 + cfg.tau**2
    c2 = 2 * cfg.beta**2 + var_w + var_l
    c = math.sqrt(c2)
    t = (winner.mu - loser.mu) / c
    v, w = _v_w(t)
    new_winner = replace(
        winner,
        mu=winner.mu + (var_w / c) * v,
        sigma=math.sqrt(var_w * max(1.0 - (var_w / c2) * w, 1e-12)),
        comparisons=winner.comparisons + 1,
    )
    new_loser = replace(
        loser,
        mu=loser.mu - (var_l / c) * v,
        sigma=math.sqrt(var_l * max(1.0 - (var_l / c2) * w, 1e-12)),
        comparisons=loser.comparisons + 1,
    )
    return new_winner, new_loser


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))


def select_pairs(
    states: list,
    k: int,
    exclusions: set | None = None,
    seed: int = 0,
    cfg: RankingConfig | None = None,
) -> list:
    """Pick k informative pairs.

    Scores each candidate pair by binary entropy of the predicted outcome
    times combined posterior variance, then greedily takes the best while
    capping per-image multiplicity at ceil(2k/n) + 1 and skipping excluded
    pairs. Ties resolve by a seeded jitter, so a fixed seed gives a fixed
    batch.
    """
    cfg = cfg or RankingConfig()
    n = len(states)
    if n < 2:
        raise NotEnoughImages("need at least 2 images to form pairs")
    if k < 1:
        raise ValueError("k must be >= 1")
    exclusions = exclusions or set()
    mu = np.array([s.mu for s in states])
    var = np.array([s.sigma**2 for s in states])
    iu, ju = np.triu_indices(n, k=1)
    c = np.sqrt(2 * cfg.beta**2 + var[iu] + var[ju])
    p_win = norm.cdf((mu[iu] - mu[ju]) / c)
    g = _binary_entropy(p_win) * (var[iu] + var[ju])
    rng = np.random.default_rng(seed)
    g = g + rng.uniform(0, 1e-9, size=g.shape)  # seeded tie-break
    order = np.argsort(-g)
    cap = math.ceil(2 * k / n) + 1
    counts = np.zeros(n, dtype=int)
    chosen = []
    for idx in order:
        i, j = int(iu[idx]), int(ju[idx])
        a, b = states[i].image_id, states[j].image_id
        if frozenset((a, b)) in exclusions:
            continue
        if counts[i] >= cap or counts[j] >= cap:
            continue
        chosen.append((a, b))
        counts[i] += 1
        counts[j] += 1
        if len(chosen) == k:
            break
    return chosen


@dataclass
class ComparisonMatrix:
    ids: list
    wins: np.ndarray

    @classmethod
    def empty(cls, ids: list) -> "ComparisonMatrix":
        return cls(ids=list(ids), wins=np.zeros((len(ids), len(ids)), dtype=np.int64))

    def record(self, winner: str, loser: str) -> None:
        i = self.ids.index(winner)
        j = self.ids.index(loser)
        self.wins[i, j] += 1

    @property
    def total(self) -> int:
        return int(self.wins.sum())


class StudyRanker:
    """Single-writer ranking engine over a fixed image catalog."""

    def __init__(self, image_ids: list, cfg: RankingConfig | None = None):
        if len(set(image_ids)) != len(image_ids):
            raise ValueError("image ids must be unique")
        self.cfg = cfg or RankingConfig()
        self.states: dict = {
            img: RatingState(image_id=img, mu=self.cfg.mu0, sigma=self.cfg.sigma0)
            for img in image_ids
        }
        self.matrix = ComparisonMatrix.empty(image_ids)
        self.stage_reports: list = []
        self._previous_scores: dict | None = None
        self._streak = 0
        self.total_updates = 0

    @property
    def converged(self) -> bool:
        return self._streak >= self.cfg.convergence_stages

    def apply_trial(self, trial: TrialRecord) -> bool:
        """Apply one trial; attention checks and unknown pairs are policy
        errors, not updates. Returns True when an update happened."""
        if trial.is_attention_check:
            return False
        a, b = trial.pair
        if a not in self.states or b not in self.states:
            raise UnknownImage(f"trial references unknown image in pair {trial.pair}")
        winner = trial.choice
        loser = b if winner == a else a
        new_w, new_l = update_pair(self.states[winner], self.states[loser], self.cfg)
        self.states[winner] = new_w
        self.states[loser] = new_l
        self.matrix.record(winner, loser)
        self.total_updates += 1
        return True

    def run_stage(self, trials: list) -> StageReport:
        """Apply a stage's trials in timestamp order and snapshot scores."""
        valid = 0
        for trial in sorted(trials, key=lambda t: (t.timestamp, t.trial_id)):
            if self.apply_trial(trial):
                valid += 1
        scores = {img: s.mu for img, s in self.states.items()}
        if self._previous_scores is None:
            r_p, r_s = 1.0, 1.0
        else:
            ids = sorted(scores)
            prev = np.array([self._previous_scores[i] for i in ids])
            cur = np.array([scores[i] for i in ids])
            if np.ptp(prev) == 0 or np.ptp(cur) == 0:
                r_p = r_s = 1.0 if np.array_equal(prev, cur) else 0.0
            else:
                r_p = float(pearsonr(prev, cur)[0])
                r_s = float(spearmanr(prev, cur)[0])
        # a stage only counts toward convergence when it carried evidence
        if valid >= 1 and r_p > self.cfg.convergence_r:
            self._streak += 1
        elif valid >= 1:
            self._streak = 0
        report = StageReport(
            stage=len(self.stage_reports),
            scores=scores,
            pearson_to_previous=r_p,
            spearman_to_previous=r_s,
            valid_trials=valid,
            converged=self.converged,
        )
        self.stage_reports.append(report)
        self._previous_scores = scores
        return report

    def final_scores(self) -> dict:
        """Posterior mean per image plus a min-max normalized form."""
        if self.total_updates == 0:
            raise NoTrials("no comparisons applied yet")
        mus = {img: s.mu for img, s in self.states.items()}
        lo, hi = min(mus.values()), max(mus.values())
        span = hi - lo if hi > lo else 1.0
        return {
            img: {"mu": s.mu, "sigma": s.sigma,
                  "n_comparisons": s.comparisons,
                  "normalized": (s.mu - lo) / span}
            for img, s in self.states.items()
        }


@dataclass
class SimulationResult:
    scores: dict
    latent: dict
    spearman_to_latent: float
    trials_used: int
    stage_curve: list  # (stage, trials so far, spearman to latent)


def simulate_study(
    n_items: int,
    n_trials: int,
    policy: str = "active",
    seed: int = 0,
    pairs_per_stage: int | None = None,
    cfg: RankingConfig | None = None,
    noise_scale: float = 1.0,
) -> SimulationResult:
    """Seeded synthetic study against Bradley-Terry raters.

    Latent scores are 1..n; a rater prefers i over j with probability
    sigmoid((s_i - s_j) / noise_scale). The policy is either the active
    information-driven sampler or uniform random pairing at equal budget.
    """
    if n_items < 2:
        raise NotEnoughImages("need at least 2 items")
    if policy not in ("active", "random"):
        raise ValueError(f"unknown policy: {policy}")
    cfg = cfg or RankingConfig()
    rng = np.random.default_rng(seed)
    ids = [f"item-{i:04d}" for i in range(n_items)]
    latent = {ids[i]: float(i + 1) for i in range(n_items)}
    ranker = StudyRanker(ids, cfg)
    pairs_per_stage = pairs_per_stage or cfg.stage_pair_count
    curve = []
    used = 0
    stage = 0
    previous_pairs: set = set()
    while used < n_trials:
        k = min(pairs_per_stage, n_trials - used)
        if policy == "active":
            pairs = select_pairs(
                list(ranker.states.values()), k,
                exclusions=previous_pairs, seed=seed * 7919 + stage, cfg=cfg,
            )
        else:
            pairs = []
            while len(pairs) < k:
                i, j = rng.choice(n_items, size=2, replace=False)
                pairs.append((ids[int(i)], ids[int(j)]))
        trials = []
        for t, (a, b) in enumerate(pairs):
            p_a = 1.0 / (1.0 + math.exp(-(latent[a] - latent[b]) / noise_scale))
            choice = a if rng.random() < p_a else b
            trials.append(
                TrialRecord(
                    trial_id=f"s{stage}-t{t}",
                    stage=stage,
                    rater_id=f"sim-rater-{t % 20}",
                    pair=(a, b),
                    choice=choice,
                    latency=1.0,
                    timestamp=float(stage * 10_000 + t),
                )
            )
        ranker.run_stage(trials)
        previous_pairs = {frozenset(p) for p in pairs}
        used += len(pairs)
        stage += 1
        mus = [ranker.states[i].mu for i in ids]
        truth = [latent[i] for i in ids]
        curve.append((stage, used, float(spearmanr(mus, truth)[0])))
    scores = ranker.final_scores()
    return SimulationResult(
        scores=scores,
        latent=latent,
        spearman_to_latent=curve[-1][2],
        trials_used=used,
        stage_curve=curve,
    )
