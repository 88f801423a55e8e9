"""Seeded synthetic vignettes with a known latent structure.

Each vignette is drawn from a latent condition. A condition fixes a true triage
level and a template of characteristic symptoms and risk factors; present
evidence is mostly drawn from the template, absent evidence mostly from outside
it. Experts report the true level, each independently shifted by one level with
probability ``expert_noise`` (clipped at Red and Blue).

Defaults follow the published vignette statistics (evidence counts, number of
decisions per vignette, triage distribution). The true-level prior is chosen so
that the distribution of *expert decisions* after noise matches
``triage_prior``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import N_TRIAGE, DecisionBag, Dataset, EvidenceAssignment, TriageLevel, Vignette
from .errors import ConfigError
from .metrics import is_appropriate


@dataclass
class GeneratorConfig:
    evidence_space: int = 40
    n_vignettes: int = 360
    risk_factor_fraction: float = 0.2
    symptoms_present: float = 3.70
    symptoms_absent: float = 2.45
    risk_present: float = 0.79
    risk_absent: float = 0.34
    decisions_mean: float = 3.36
    decisions_max: int = 11
    triage_prior: tuple[float, float, float, float] = (0.09, 0.34, 0.48, 0.09)
    expert_noise: float = 0.15
    n_latent_conditions: int = 16
    template_symptoms: int = 5
    template_risks: int = 2
    # probability that a present (absent) item comes from inside (outside) the template
    signal: float = 0.8
    seed: int = 0

    def __post_init__(self):
        self.triage_prior = tuple(float(p) for p in self.triage_prior)
        if len(self.triage_prior) != N_TRIAGE or min(self.triage_prior) < 0:
            raise ConfigError("triage_prior needs four non-negative entries")
        if abs(sum(self.triage_prior) - 1.0) > 1e-9:
            raise ConfigError(f"triage_prior must sum to 1, got {sum(self.triage_prior)}")
        means = (self.symptoms_present, self.symptoms_absent, self.risk_present, self.risk_absent)
        if min(means) < 0 or self.decisions_mean < 1:
            raise ConfigError("evidence means must be >= 0 and decisions_mean >= 1")
        if not 0 <= self.expert_noise <= 1 or not 0 <= self.signal <= 1:
            raise ConfigError("expert_noise and signal are probabilities")
        n_risk = self.n_risk_factors
        n_sym = self.evidence_space - n_risk
        if n_sym < self.template_symptoms + 1 or n_risk < self.template_risks:
            raise ConfigError(f"evidence_space {self.evidence_space} too small for the templates")
        if self.symptoms_present + self.symptoms_absent > n_sym or self.risk_present + self.risk_absent > max(n_risk, 0):
            raise ConfigError(f"evidence_space {self.evidence_space} too small for the requested evidence counts")
        if self.n_latent_conditions < N_TRIAGE:
            raise ConfigError("need at least one latent condition per triage level")

    @property
    def n_risk_factors(self) -> int:
        return int(round(self.evidence_space * self.risk_factor_fraction))


@dataclass
class Condition:
    level: TriageLevel
    symptoms: tuple[int, ...]
    risks: tuple[int, ...]


@dataclass
class GroundTruth:
    conditions: list[Condition]
    vignette_condition: dict[str, int] = field(default_factory=dict)
    vignette_level: dict[str, TriageLevel] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "conditions": [{"level": c.level.name.lower(), "symptoms": list(c.symptoms), "risks": list(c.risks)}
                           for c in self.conditions],
            "vignettes": {vid: {"condition": self.vignette_condition[vid],
                                "level": self.vignette_level[vid].name.lower()}
                          for vid in self.vignette_condition},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> GroundTruth:
        doc = json.loads(Path(path).read_text())
        conds = [Condition(TriageLevel[c["level"].upper()], tuple(c["symptoms"]), tuple(c["risks"]))
                 for c in doc["conditions"]]
        gt = cls(conds)
        for vid, rec in doc["vignettes"].items():
            gt.vignette_condition[vid] = rec["condition"]
            gt.vignette_level[vid] = TriageLevel[rec["level"].upper()]
        return gt


def noise_matrix(noise: float) -> np.ndarray:
    """M[d, t] = P(expert says d | true level t)."""
    m = np.zeros((N_TRIAGE, N_TRIAGE))
    for t in range(N_TRIAGE):
        m[t, t] = 1.0 - noise
        for d in (t - 1, t + 1):
            m[min(max(d, 0), N_TRIAGE - 1), t] += noise / 2
    return m


def true_level_prior(config: GeneratorConfig) -> np.ndarray:
    """Prior over true levels whose noisy expert decisions follow ``triage_prior``.

    Falls back to ``triage_prior`` itself when the inversion would need negative mass.
    """
    target = np.array(config.triage_prior)
    try:
        p = np.linalg.solve(noise_matrix(config.expert_noise), target)
    except np.linalg.LinAlgError:
        return target
    if (p < 0).any():
        return target
    return p / p.sum()


def _choose(rng: np.random.Generator, pool: np.ndarray, k: int) -> list[int]:
    k = min(k, len(pool))
    return [int(i) for i in rng.choice(pool, size=k, replace=False)] if k > 0 else []


def _draw_items(rng, n, inside, outside, p_inside) -> list[int]:
    """Draw ``n`` distinct items, each from ``inside`` w.p. ``p_inside`` when both pools allow it."""
    inside, outside = list(inside), list(outside)
    chosen = []
    for _ in range(n):
        use_inside = inside and (not outside or rng.random() < p_inside)
        pool = inside if use_inside else outside
        if not pool:
            break
        j = int(rng.integers(len(pool)))
        chosen.append(pool.pop(j))
    return chosen


def make_conditions(config: GeneratorConfig, rng: np.random.Generator) -> list[Condition]:
    n_risk = config.n_risk_factors
    symptoms = np.arange(config.evidence_space - n_risk)
    risks = np.arange(config.evidence_space - n_risk, config.evidence_space)
    conditions = []
    for c in range(config.n_latent_conditions):
        conditions.append(Condition(
            TriageLevel(c % N_TRIAGE),
            tuple(sorted(_choose(rng, symptoms, config.template_symptoms))),
            tuple(sorted(_choose(rng, risks, config.template_risks))),
        ))
    return conditions


def _expert_bag(rng, level: int, config: GeneratorConfig) -> DecisionBag:
    n = min(config.decisions_max, 1 + int(rng.poisson(config.decisions_mean - 1)))
    levels = []
    for _ in range(n):
        d = level
        if rng.random() < config.expert_noise:
            d = level + (1 if rng.random() < 0.5 else -1)
        levels.append(min(max(d, 0), N_TRIAGE - 1))
    return DecisionBag.from_levels(levels)


def generate_with_truth(config: GeneratorConfig) -> tuple[Dataset, GroundTruth]:
    rng = np.random.default_rng(config.seed)
    conditions = make_conditions(config, rng)
    by_level = {lvl: [i for i, c in enumerate(conditions) if c.level == lvl] for lvl in TriageLevel}
    prior = true_level_prior(config)
    n_risk = config.n_risk_factors
    n_sym = config.evidence_space - n_risk
    all_sym = set(range(n_sym))
    all_risk = set(range(n_sym, config.evidence_space))
    names = [f"symptom_{i:03d}" for i in range(n_sym)] + [f"risk_{i:03d}" for i in range(n_risk)]
    truth = GroundTruth(conditions)
    vignettes = []
    width = len(str(config.n_vignettes))
    for k in range(config.n_vignettes):
        level = TriageLevel(int(rng.choice(N_TRIAGE, p=prior)))
        cid = by_level[level][int(rng.integers(len(by_level[level])))]
        cond = conditions[cid]
        items: list[EvidenceAssignment] = []
        for template, universe, n_present, n_absent in (
            (set(cond.symptoms), all_sym, config.symptoms_present, config.symptoms_absent),
            (set(cond.risks), all_risk, config.risk_present, config.risk_absent),
        ):
            present = _draw_items(rng, int(rng.poisson(n_present)), sorted(template),
                                  sorted(universe - template), config.signal)
            remaining = universe - set(present)
            absent = _draw_items(rng, int(rng.poisson(n_absent)), sorted(remaining - template),
                                 sorted(remaining & template), config.signal)
            items += [EvidenceAssignment(i, True) for i in present]
            items += [EvidenceAssignment(i, False) for i in absent]
        if not items:
            items = [EvidenceAssignment(_draw_items(rng, 1, sorted(cond.symptoms), [], 1.0)[0], True)]
        items.sort(key=lambda e: e.index)
        vid = f"v{k:0{width}d}"
        vignettes.append(Vignette(vid, tuple(items), _expert_bag(rng, int(level), config)))
        truth.vignette_condition[vid] = cid
        truth.vignette_level[vid] = level
    return Dataset(names, vignettes), truth


def generate(config: GeneratorConfig) -> Dataset:
    return generate_with_truth(config)[0]


@dataclass
class OracleResult:
    decisions: dict[str, TriageLevel]
    per_condition: dict[int, TriageLevel]
    ceiling: float


def bayes_oracle(dataset: Dataset, truth: GroundTruth) -> OracleResult:
    """Best decision per latent condition by enumerating the four levels.

    The ceiling is the appropriateness of the policy that knows each vignette's
    condition and answers with that condition's best level; no policy that sees
    only the condition can do better on this dataset.
    """
    groups: dict[int, list[Vignette]] = {}
    for v in dataset:
        groups.setdefault(truth.vignette_condition[v.id], []).append(v)
    per_condition = {}
    hits = 0
    for cid, members in sorted(groups.items()):
        scores = [sum(is_appropriate(d, v.decisions) for v in members) for d in TriageLevel]
        best = int(np.argmax(scores))
        per_condition[cid] = TriageLevel(best)
        hits += scores[best]
    decisions = {v.id: per_condition[truth.vignette_condition[v.id]] for v in dataset}
    return OracleResult(decisions, per_condition, hits / len(dataset) if len(dataset) else 0.0)


def config_dict(config: GeneratorConfig) -> dict:
    d = asdict(config)
    d["triage_prior"] = list(config.triage_prior)
    return d
