"""Subspace-selective self-adaptive differential evolution.

The loop is DE/rand/1 with per-individual mutation and crossover rates that
self-adapt in the jDE manner.  Each generation draws ``r_g``; when
``r_g < S`` breeding is restricted to a random ``m``-dimensional coordinate
subspace shared by the whole generation, otherwise every coordinate may
cross over.

Random draws come from counter-based streams keyed by
``(seed, generation, individual)``.  The order of draws inside a stream is
fixed (self-adaptation, mutation partners, crossover uniforms), so a run is
bit-reproducible for any evaluator and can be resumed from a checkpoint.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from metrics import (
    record_checkpoint,
    record_failed_evaluation,
    record_fitness_evaluations,
    record_generation,
)
from model import ParameterError
from run_hooks import OptimizerHooks
from workers import Evaluator, SerialEvaluator

VARIANT_SUSSADE = "sussade"
VARIANT_DE = "de"
VARIANTS = (VARIANT_SUSSADE, VARIANT_DE)

STOP_TARGET = "target_reached"
STOP_GENERATIONS = "max_generations"
STOP_EVALUATIONS = "max_evaluations"

CHECKPOINT_VERSION = 1
_INIT_STREAM = 0
_GENERATION_STREAM = 1
_INDIVIDUAL_STREAM = 2
# fields that may change between a checkpoint and its resumption
_RESUMABLE_FIELDS = ("max_generations", "max_evaluations", "target_fitness")

module_logger = logging.getLogger(__name__)


class OptimizationAborted(RuntimeError):
    """Raised when the objective fails; ``partial`` holds the state so far."""

    def __init__(self, message: str, partial: "OptimizationResult") -> None:
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SussadeConfig:
    """Optimizer settings.

    The self-adaptation constants default to ``mu_l = mu_u = kappa1 = 0.1``
    and ``kappa2 = 0.9``, so mutation rates live in ``[0.1, 0.2]`` and the
    crossover rate is resampled in most generations.  Use
    :meth:`jde_convention` for the usual jDE constants.
    """

    population_size: int = 32
    dims: Optional[int] = None
    mu_l: float = 0.1
    mu_u: float = 0.1
    kappa1: float = 0.1
    kappa2: float = 0.9
    switch_s: float = 0.5
    subspace_m: int = 1
    max_generations: int = 2000
    max_evaluations: Optional[int] = None
    target_fitness: float = 0.999
    seed: int = 0
    bounds: tuple[float, float] = (-2.5, 2.5)
    initial_mu: Optional[float] = None
    initial_xi: float = 0.9
    variant: str = VARIANT_SUSSADE
    jrand: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        if self.population_size < 4:
            raise ParameterError("population_size must be at least 4")
        if self.dims is not None and self.dims < 1:
            raise ParameterError("dims must be positive")
        if not 0.0 <= self.switch_s <= 1.0:
            raise ParameterError(f"switch_s must lie in [0, 1], got {self.switch_s}")
        for name in ("kappa1", "kappa2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1]")
        if self.mu_l < 0 or self.mu_u < 0:
            raise ParameterError("mu_l and mu_u must be non-negative")
        if self.subspace_m < 1:
            raise ParameterError("subspace_m must be at least 1")
        if self.max_generations < 0:
            raise ParameterError("max_generations must be non-negative")
        if self.max_evaluations is not None and self.max_evaluations < self.population_size:
            raise ParameterError("max_evaluations must cover the initial population")
        if self.seed < 0:
            raise ParameterError("seed must be a non-negative integer")
        lo, hi = self.bounds
        if not lo < hi:
            raise ParameterError(f"bounds must satisfy lo < hi, got {self.bounds}")
        if self.initial_mu is not None and self.initial_mu < 0:
            raise ParameterError("initial_mu must be non-negative")
        if not 0.0 <= self.initial_xi <= 1.0:
            raise ParameterError("initial_xi must lie in [0, 1]")
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}")

    @classmethod
    def jde_convention(cls, **overrides: Any) -> "SussadeConfig":
        """Constants of standard jDE: ``F`` in ``[0.1, 1.0]``, both rates resampled w.p. 0.1."""
        base = dict(mu_l=0.1, mu_u=0.9, kappa1=0.1, kappa2=0.1, initial_mu=0.5, initial_xi=0.9)
        base.update(overrides)
        return cls(**base)

    @property
    def start_mu(self) -> float:
        if self.initial_mu is not None:
            return self.initial_mu
        return self.mu_l + 0.5 * self.mu_u

    def to_json_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["bounds"] = list(self.bounds)
        return data

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "SussadeConfig":
        data = dict(data)
        if "bounds" in data:
            data["bounds"] = tuple(data["bounds"])
        return cls(**data)


@dataclass
class Individual:
    genome: np.ndarray
    mu: float
    xi: float
    fitness: Optional[float] = None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "genome": [float(x) for x in self.genome],
            "mu": self.mu,
            "xi": self.xi,
            "fitness": self.fitness,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "Individual":
        return cls(np.asarray(data["genome"], dtype=float), data["mu"], data["xi"], data["fitness"])


@dataclass
class OptimizationResult:
    best_genome: np.ndarray
    best_fitness: float
    history: list[tuple[int, float, float]]
    population: list[Individual]
    generation: int
    evaluations: int
    stop_reason: Optional[str] = None
    config: Optional[SussadeConfig] = field(default=None, repr=False)

    @property
    def target_reached(self) -> bool:
        return self.stop_reason == STOP_TARGET

    def history_rows(self) -> list[list[float]]:
        return [[g, best, mean] for g, best, mean in self.history]


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


# ----------------------------------------------------------------------
# operators


def reflect_into_bounds(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Fold out-of-range coordinates back into ``[lo, hi]``; in-range ones are untouched."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    bad = (x < lo) | (x > hi)
    if np.any(bad):
        width = hi - lo
        y = np.mod(x[bad] - lo, 2.0 * width)
        y = np.where(y > width, 2.0 * width - y, y)
        out[bad] = np.clip(lo + y, lo, hi)
    return out


def self_adapt(ind: Individual, cfg: SussadeConfig, rng: np.random.Generator) -> tuple[float, float]:
    """New ``(mu, xi)`` for ``ind``; four uniforms on ``(0, 1]`` are always drawn."""
    r1, r2, r3, r4 = 1.0 - rng.random(4)
    if cfg.variant == VARIANT_DE:
        return ind.mu, ind.xi
    mu = cfg.mu_l + r1 * cfg.mu_u if r2 < cfg.kappa1 else ind.mu
    xi = float(r3) if r4 < cfg.kappa2 else ind.xi
    return float(mu), xi


def mutate(population: np.ndarray, i: int, mu: float, rng: np.random.Generator) -> np.ndarray:
    """``D[r1] + mu * (D[r2] - D[r3])`` with distinct partners other than ``i``."""
    n = population.shape[0]
    if n < 4:
        raise ParameterError("mutation needs at least four individuals")
    others = np.delete(np.arange(n), i)
    r1, r2, r3 = rng.choice(others, size=3, replace=False)
    return population[r1] + mu * (population[r2] - population[r3])


def crossover(
    d: np.ndarray,
    m: np.ndarray,
    xi: float,
    active_dims: Sequence[int] | np.ndarray,
    rng: np.random.Generator,
    *,
    jrand: bool = False,
) -> np.ndarray:
    """Take ``m[j]`` where ``r_j < xi`` on the active coordinates, ``d[j]`` elsewhere.

    One uniform is drawn per coordinate, active or not.  With ``jrand`` one
    active coordinate is always taken from ``m``.
    """
    active = np.asarray(active_dims, dtype=int)
    if active.size == 0:
        raise ParameterError("crossover needs at least one active coordinate")
    r = rng.random(d.shape[0])
    take = np.zeros(d.shape[0], dtype=bool)
    take[active] = r[active] < xi
    if jrand:
        take[active[rng.integers(active.size)]] = True
    return np.where(take, m, d)


def select(parent: Individual, child: Individual) -> Individual:
    """Keep ``child`` only if it is strictly fitter."""
    if child.fitness is None or parent.fitness is None:
        raise ParameterError("selection needs evaluated individuals")
    return child if child.fitness > parent.fitness else parent


# ----------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str | Path, result: OptimizationResult, cfg: SussadeConfig) -> None:
    data = {
        "version": CHECKPOINT_VERSION,
        "config": cfg.to_json_dict(),
        "generation": result.generation,
        "evaluations": result.evaluations,
        "history": [list(row) for row in result.history],
        "population": [ind.to_json_dict() for ind in result.population],
    }
    tmp = Path(f"{path}.tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(data, f)
    tmp.replace(path)
    record_checkpoint()


def load_checkpoint(path: str | Path) -> tuple[OptimizationResult, SussadeConfig]:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if data.get("version") != CHECKPOINT_VERSION:
        raise ParameterError(f"unsupported checkpoint version {data.get('version')!r}")
    cfg = SussadeConfig.from_json_dict(data["config"])
    population = [Individual.from_json_dict(d) for d in data["population"]]
    result = _summarize(
        population,
        [tuple(row) for row in data["history"]],
        data["generation"],
        data["evaluations"],
        None,
        cfg,
    )
    return result, cfg


def _check_resumable(saved: SussadeConfig, cfg: SussadeConfig) -> None:
    pinned = {k: v for k, v in saved.to_json_dict().items() if k not in _RESUMABLE_FIELDS}
    wanted = {k: v for k, v in cfg.to_json_dict().items() if k not in _RESUMABLE_FIELDS}
    if pinned != wanted:
        diff = sorted(k for k in pinned if pinned[k] != wanted.get(k))
        raise ParameterError(f"checkpoint was written with different settings: {', '.join(diff)}")


# ----------------------------------------------------------------------
# driver


def _summarize(
    population: list[Individual],
    history: list[tuple[int, float, float]],
    generation: int,
    evaluations: int,
    stop_reason: Optional[str],
    cfg: SussadeConfig,
) -> OptimizationResult:
    fits = np.array([ind.fitness for ind in population], dtype=float)
    best = int(np.argmax(fits))
    return OptimizationResult(
        best_genome=population[best].genome.copy(),
        best_fitness=float(fits[best]),
        history=list(history),
        population=population,
        generation=generation,
        evaluations=evaluations,
        stop_reason=stop_reason,
        config=cfg,
    )


def _check_subspace(cfg: SussadeConfig, dims: int) -> None:
    if cfg.variant == VARIANT_SUSSADE and cfg.subspace_m > dims:
        raise ParameterError(f"subspace_m={cfg.subspace_m} exceeds genome length {dims}")


def _evaluate(
    objective: Callable[[np.ndarray], float],
    genomes: list[np.ndarray],
    evaluator: Evaluator,
) -> list[float]:
    fits = [float(v) for v in evaluator.map(objective, genomes)]
    record_fitness_evaluations(len(fits))
    bad = [i for i, v in enumerate(fits) if not math.isfinite(v)]
    if bad:
        raise ValueError(f"objective returned non-finite fitness for candidates {bad}")
    return fits


def _initial_population(
    cfg: SussadeConfig, dims: int, initial_genome: Optional[np.ndarray]
) -> list[Individual]:
    lo, hi = cfg.bounds
    genomes = _stream(cfg.seed, _INIT_STREAM).uniform(lo, hi, size=(cfg.population_size, dims))
    if initial_genome is not None:
        genomes[0] = reflect_into_bounds(initial_genome, lo, hi)
    return [Individual(g, cfg.start_mu, cfg.initial_xi) for g in genomes]


def run_sussade(
    objective: Callable[[np.ndarray], float],
    cfg: SussadeConfig,
    *,
    initial_genome: Optional[Sequence[float]] = None,
    evaluator: Optional[Evaluator] = None,
    hooks: Optional[OptimizerHooks] = None,
    logger: Optional[logging.Logger] = None,
    resume: Optional[OptimizationResult] = None,
    checkpoint_path: Optional[str | Path] = None,
    checkpoint_every: int = 0,
) -> OptimizationResult:
    """Maximize ``objective`` over the box ``cfg.bounds ** dims``.

    Parameters
    ----------
    objective:
        Deterministic map from a genome to a fitness; must be picklable when
        ``evaluator`` is a process pool.
    cfg:
        Optimizer settings.  ``cfg.dims`` may be omitted when
        ``initial_genome`` or ``resume`` fixes the genome length.
    initial_genome:
        Warm start placed in slot 0 of the initial population.
    evaluator:
        Back end for the per-generation batch of evaluations.
    hooks:
        Progress callbacks.
    logger:
        Logger for progress messages; defaults to this module's logger.
    resume:
        State loaded by :func:`load_checkpoint`; the run continues from its
        generation and reproduces the uninterrupted run exactly.
    checkpoint_path, checkpoint_every:
        Write a checkpoint every ``checkpoint_every`` generations.
    """
    log = logger or module_logger
    hooks = hooks or OptimizerHooks()
    evaluator = evaluator or SerialEvaluator()
    lo, hi = cfg.bounds

    if resume is not None:
        if resume.config is not None:
            _check_resumable(resume.config, cfg)
        population = [
            Individual(ind.genome.copy(), ind.mu, ind.xi, ind.fitness) for ind in resume.population
        ]
        history = list(resume.history)
        generation = resume.generation
        evaluations = resume.evaluations
        dims = population[0].genome.shape[0]
        _check_subspace(cfg, dims)
        log.info("resuming at generation %d (%d evaluations)", generation, evaluations)
    else:
        warm = None if initial_genome is None else np.asarray(initial_genome, dtype=float)
        dims = cfg.dims or (warm.shape[0] if warm is not None else 0)
        if dims < 1:
            raise ParameterError("genome length unknown; set cfg.dims or pass initial_genome")
        if warm is not None and warm.shape != (dims,):
            raise ParameterError(f"initial genome has length {warm.shape}, expected {dims}")
        _check_subspace(cfg, dims)
        population = _initial_population(cfg, dims, warm)
        history = []
        generation = 0
        evaluations = 0
        try:
            fits = _evaluate(objective, [ind.genome for ind in population], evaluator)
        except Exception as exc:
            record_failed_evaluation()
            raise OptimizationAborted(
                f"objective failed on the initial population: {exc}",
                OptimizationResult(np.full(dims, np.nan), -math.inf, [], population, 0, 0, None, cfg),
            ) from exc
        for ind, f in zip(population, fits):
            ind.fitness = f
        evaluations = len(fits)
        history.append((0, max(fits), float(np.mean(fits))))

    best = max(ind.fitness for ind in population)  # type: ignore[type-var]
    stop_reason: Optional[str] = STOP_TARGET if best >= cfg.target_fitness else None
    all_dims = np.arange(dims)

    while stop_reason is None:
        if generation >= cfg.max_generations:
            stop_reason = STOP_GENERATIONS
            break
        if cfg.max_evaluations is not None and evaluations + cfg.population_size > cfg.max_evaluations:
            stop_reason = STOP_EVALUATIONS
            break

        grng = _stream(cfg.seed, _GENERATION_STREAM, generation)
        r_g = grng.random()
        active = all_dims
        if cfg.variant == VARIANT_SUSSADE and r_g < cfg.switch_s:
            active = np.sort(grng.choice(dims, size=cfg.subspace_m, replace=False))

        genomes = np.array([ind.genome for ind in population])
        children = []
        for i, parent in enumerate(population):
            rng = _stream(cfg.seed, _INDIVIDUAL_STREAM, generation, i)
            mu, xi = self_adapt(parent, cfg, rng)
            trial = mutate(genomes, i, mu, rng)
            cand = crossover(parent.genome, trial, xi, active, rng, jrand=cfg.jrand)
            children.append(Individual(reflect_into_bounds(cand, lo, hi), mu, xi))

        try:
            fits = _evaluate(objective, [c.genome for c in children], evaluator)
        except Exception as exc:
            record_failed_evaluation()
            partial = _summarize(population, history, generation, evaluations, None, cfg)
            raise OptimizationAborted(
                f"objective failed in generation {generation + 1}: {exc}", partial
            ) from exc
        evaluations += len(fits)
        for i, (child, f) in enumerate(zip(children, fits)):
            child.fitness = f
            population[i] = select(population[i], child)
        generation += 1
        record_generation()

        fits_now = [ind.fitness for ind in population]
        new_best = float(max(fits_now))  # type: ignore[type-var]
        mean = float(np.mean(fits_now))
        history.append((generation, new_best, mean))
        log.debug(
            "generation %d: best %.10f mean %.10f (%s)",
            generation,
            new_best,
            mean,
            "subspace" if active is not all_dims else "whole space",
        )
        if hooks.on_generation:
            hooks.on_generation(generation, new_best, mean)
        if new_best > best:
            log.info("generation %d: best fitness %.10f", generation, new_best)
            if hooks.on_improvement:
                hooks.on_improvement(generation, new_best)
        best = new_best
        if best >= cfg.target_fitness:
            stop_reason = STOP_TARGET

        if checkpoint_path and checkpoint_every > 0 and generation % checkpoint_every == 0:
            save_checkpoint(
                checkpoint_path,
                _summarize(population, history, generation, evaluations, None, cfg),
                cfg,
            )
            if hooks.on_checkpoint:
                hooks.on_checkpoint(Path(checkpoint_path))

    result = _summarize(population, history, generation, evaluations, stop_reason, cfg)
    log.info(
        "stopped after %d generations and %d evaluations (%s): best fitness %.10f",
        generation,
        evaluations,
        stop_reason,
        result.best_fitness,
    )
    return result
