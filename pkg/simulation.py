"""
Monte-Carlo harness for the level and power of the moment tests on
Gaussian mixtures with varying concentrations
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from pathos import pools as pp
from tqdm import tqdm

from config import Config
from hypotheses import HypothesisSpec, parse_hypothesis_spec
from moment_tests import MODIFICATIONS, run_all_modifications
from weights import ConcentrationMatrix, SingularDesign

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['N', 'modification', 'rejection_freq', 'bad_cov_freq', 'R_valid']


def _float_list(value: str) -> List[float]:
    return [float(v) for v in str(value).split(',') if v.strip()]


def _int_list(value: str) -> List[int]:
    return [int(v) for v in str(value).split(',') if v.strip()]


def _flag(value: str) -> bool:
    return str(value).strip().lower() in ('1', 'true', 'yes', 'on')


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulated experiment: Gaussian components, hypothesis and sweep settings"""

    M: int
    means: Tuple[float, ...]
    variances: Tuple[float, ...]
    hypothesis: HypothesisSpec
    sample_sizes: Tuple[int, ...] = tuple(Config.DEFAULT_SAMPLE_SIZES)
    replications: int = Config.DEFAULT_REPLICATIONS
    alpha: float = Config.DEFAULT_ALPHA
    modifications: Tuple[str, ...] = MODIFICATIONS
    seed: int = Config.DEFAULT_SEED
    fixed_concentrations: bool = False
    name: str = 'scenario'
    workers: int = Config.DEFAULT_WORKERS

    def __post_init__(self):
        object.__setattr__(self, 'means', tuple(float(v) for v in self.means))
        object.__setattr__(self, 'variances', tuple(float(v) for v in self.variances))
        object.__setattr__(self, 'sample_sizes', tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, 'modifications', tuple(self.modifications))

        errors = []
        if self.M < 1:
            errors.append("M must be positive")
        if len(self.means) != self.M or len(self.variances) != self.M:
            errors.append(f"need {self.M} means and variances")
        if any(v <= 0 for v in self.variances):
            errors.append("variances must be positive")
        if self.replications < 1:
            errors.append("replications must be at least 1")
        if not self.sample_sizes or min(self.sample_sizes) < self.M:
            errors.append("sample sizes must be at least M")
        if len(set(self.sample_sizes)) != len(self.sample_sizes):
            errors.append("sample sizes must not repeat")
        if not 0.0 < self.alpha < 1.0:
            errors.append("alpha must be in (0, 1)")
        if self.workers < 1:
            errors.append("workers must be at least 1")
        unknown = [m for m in self.modifications if m not in MODIFICATIONS]
        if unknown or not self.modifications:
            errors.append(f"modifications must be a non-empty subset of {MODIFICATIONS}")
        if self.hypothesis.M != self.M:
            errors.append("hypothesis was built for a different number of components")

        if errors:
            raise ValueError(f"Scenario configuration errors: {', '.join(errors)}")


def load_scenario_config(path) -> ScenarioConfig:
    """
    Read a flat KEY=value scenario file

    Keys: M, MEANS, VARIANCES, HYPOTHESIS, SAMPLE_SIZES, REPLICATIONS, ALPHA,
    MODIFICATIONS, SEED, FIXED_CONCENTRATIONS, WORKERS, NAME

    Args:
        path: Path to the scenario file

    Returns:
        ScenarioConfig
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")
    values = {k.upper(): v for k, v in dotenv_values(path).items() if v is not None}
    logger.info(f"Loaded scenario {path.name} with keys {sorted(values)}")

    missing = [k for k in ('M', 'MEANS', 'VARIANCES', 'HYPOTHESIS') if k not in values]
    if missing:
        raise ValueError(f"Scenario file {path} is missing keys: {', '.join(missing)}")

    M = int(values['M'])
    return ScenarioConfig(
        M=M,
        means=tuple(_float_list(values['MEANS'])),
        variances=tuple(_float_list(values['VARIANCES'])),
        hypothesis=parse_hypothesis_spec(values['HYPOTHESIS'], M),
        sample_sizes=tuple(_int_list(values.get('SAMPLE_SIZES', ','.join(map(str, Config.DEFAULT_SAMPLE_SIZES))))),
        replications=int(values.get('REPLICATIONS', Config.DEFAULT_REPLICATIONS)),
        alpha=float(values.get('ALPHA', Config.DEFAULT_ALPHA)),
        modifications=tuple(m.strip() for m in values.get('MODIFICATIONS', 'ss,si,ii').split(',') if m.strip()),
        seed=int(values.get('SEED', Config.DEFAULT_SEED)),
        fixed_concentrations=_flag(values.get('FIXED_CONCENTRATIONS', 'false')),
        name=values.get('NAME', path.stem),
        workers=int(values.get('WORKERS', Config.DEFAULT_WORKERS)),
    )


@dataclass
class MixtureSample:
    """Simulated observations with their latent component labels"""

    x: np.ndarray
    labels: np.ndarray


@dataclass
class ScenarioResult:
    """Tallies per (N, modification)"""

    scenario: str
    counts: Dict[Tuple[int, str], Dict[str, int]] = field(default_factory=dict)

    def add(self, n: int, modification: str, tally: Dict[str, int]):
        current = self.counts.setdefault((n, modification),
                                         {'rejections': 0, 'valid': 0, 'invalid': 0, 'total': 0})
        for key, value in tally.items():
            current[key] += value

    def rejection_frequency(self, n: int, modification: str) -> float:
        c = self.counts[(n, modification)]
        return c['rejections'] / c['valid'] if c['valid'] else float('nan')

    def incorrect_covariance_frequency(self, n: int, modification: str) -> float:
        c = self.counts[(n, modification)]
        return c['invalid'] / c['total'] if c['total'] else float('nan')

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for (n, modification) in sorted(self.counts, key=lambda key: (key[0], MODIFICATIONS.index(key[1]))):
            rows.append({
                'N': n,
                'modification': modification,
                'rejection_freq': self.rejection_frequency(n, modification),
                'bad_cov_freq': self.incorrect_covariance_frequency(n, modification),
                'R_valid': self.counts[(n, modification)]['valid'],
            })
        return pd.DataFrame(rows, columns=RESULT_COLUMNS)

    def write_csv(self, output_file) -> Path:
        output_file = Path(output_file)
        self.to_frame().to_csv(output_file, index=False, float_format='%.6f')
        logger.info(f"Scenario results written to {output_file}")
        return output_file


def generate_concentrations(N: int, M: int, rng: np.random.Generator) -> ConcentrationMatrix:
    """Rows of independent uniforms divided by their sums"""
    zeta = rng.uniform(0.0, 1.0, size=(N, M))
    return ConcentrationMatrix(zeta / zeta.sum(axis=1, keepdims=True))


def sample_mixture(P: ConcentrationMatrix, means: Sequence[float], variances: Sequence[float],
                   rng: np.random.Generator) -> MixtureSample:
    """
    Draw one observation per row: a label from the row's concentrations,
    then a Gaussian value from that component

    Args:
        P: Concentration matrix
        means: Component means
        variances: Component variances
        rng: Random generator

    Returns:
        MixtureSample; labels are for diagnostics only
    """
    means = np.asarray(means, dtype=float)
    sd = np.sqrt(np.asarray(variances, dtype=float))
    if means.shape != (P.M,) or sd.shape != (P.M,):
        raise ValueError(f"Need {P.M} means and variances")
    cumulative = np.cumsum(P.P, axis=1)
    u = rng.random(P.N)
    labels = np.minimum((u[:, None] >= cumulative).sum(axis=1), P.M - 1)
    x = rng.normal(means[labels], sd[labels])
    return MixtureSample(x=x, labels=labels)


def _replication_rng(seed: int, size_index: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(size_index, replication)))


def _design_rng(seed: int, size_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(size_index,)))


def _run_replications(cfg: ScenarioConfig, size_index: int,
                      replications: Sequence[int]) -> Dict[str, Dict[str, int]]:
    """Run a chunk of replications for one sample size and tally the outcomes"""
    n = cfg.sample_sizes[size_index]
    model, hypothesis = cfg.hypothesis.build()
    fixed_P = generate_concentrations(n, cfg.M, _design_rng(cfg.seed, size_index)) \
        if cfg.fixed_concentrations else None
    tallies = {m: {'rejections': 0, 'valid': 0, 'invalid': 0, 'total': 0} for m in cfg.modifications}

    for replication in replications:
        rng = _replication_rng(cfg.seed, size_index, replication)
        P = fixed_P if fixed_P is not None else generate_concentrations(n, cfg.M, rng)
        sample = sample_mixture(P, cfg.means, cfg.variances, rng)
        try:
            reports = run_all_modifications(sample.x, P, model, hypothesis, cfg.alpha, cfg.modifications)
        except SingularDesign as e:
            logger.debug(f"N={n} replication {replication}: {e}")
            reports = {}

        for modification in cfg.modifications:
            tally = tallies[modification]
            tally['total'] += 1
            report = reports.get(modification)
            if report is None or not report.covariance_ok:
                tally['invalid'] += 1
                continue
            tally['valid'] += 1
            tally['rejections'] += int(report.rejected)

    return tallies


def _chunks(count: int, chunk_size: int) -> List[range]:
    return [range(start, min(start + chunk_size, count)) for start in range(0, count, chunk_size)]


def _run_task(cfg: ScenarioConfig, task: Tuple[int, range]):
    size_index, chunk = task
    return size_index, chunk, _run_replications(cfg, size_index, chunk)


def run_scenario(cfg: ScenarioConfig, workers: Optional[int] = None, chunk_size: int = 100,
                 show_progress: bool = True) -> ScenarioResult:
    """
    Sweep all sample sizes with R replications each

    Every replication draws from its own generator keyed by (seed, size index,
    replication), so the tallies do not depend on the number of workers.

    Args:
        cfg: Scenario configuration
        workers: Number of worker processes, defaults to cfg.workers (1 runs inline)
        chunk_size: Replications per task
        show_progress: Show a tqdm progress bar

    Returns:
        ScenarioResult
    """
    workers = cfg.workers if workers is None else workers
    result = ScenarioResult(scenario=cfg.name)
    tasks = [(size_index, chunk)
             for size_index in range(len(cfg.sample_sizes))
             for chunk in _chunks(cfg.replications, chunk_size)]
    logger.info(f"Running scenario {cfg.name}: {len(cfg.sample_sizes)} sample sizes x "
                f"{cfg.replications} replications, modifications {','.join(cfg.modifications)}, "
                f"{workers} worker(s)")

    with tqdm(total=len(cfg.sample_sizes) * cfg.replications, desc=f"Simulating {cfg.name}",
              disable=not show_progress) as pbar:
        if workers <= 1:
            for size_index, chunk in tasks:
                tallies = _run_replications(cfg, size_index, chunk)
                for modification, tally in tallies.items():
                    result.add(cfg.sample_sizes[size_index], modification, tally)
                pbar.update(len(chunk))
        else:
            pool = pp.ProcessPool(nodes=workers)
            try:
                for size_index, chunk, tallies in pool.uimap(_run_task, [cfg] * len(tasks), tasks):
                    for modification, tally in tallies.items():
                        result.add(cfg.sample_sizes[size_index], modification, tally)
                    pbar.update(len(chunk))
            finally:
                pool.close()
                pool.join()
                # pathos caches pools by node count
                pool.clear()

    for n in cfg.sample_sizes:
        summary = ', '.join(
            f"{m}: reject {result.rejection_frequency(n, m):.3f} bad D {result.incorrect_covariance_frequency(n, m):.3f}"
            for m in cfg.modifications
        )
        logger.info(f"N={n}: {summary}")

    return result


def with_overrides(cfg: ScenarioConfig, seed: Optional[int] = None,
                   replications: Optional[int] = None,
                   sample_sizes: Optional[Sequence[int]] = None,
                   workers: Optional[int] = None) -> ScenarioConfig:
    """Copy of a scenario with command-line overrides applied"""
    changes = {}
    if seed is not None:
        changes['seed'] = seed
    if replications is not None:
        changes['replications'] = replications
    if sample_sizes:
        changes['sample_sizes'] = tuple(sample_sizes)
    if workers is not None:
        changes['workers'] = workers
    return replace(cfg, **changes) if changes else cfg
