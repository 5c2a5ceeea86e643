import logging
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import simulation
from hypotheses import parse_hypothesis_spec
from simulation import (
    RESULT_COLUMNS,
    ScenarioConfig,
    ScenarioResult,
    generate_concentrations,
    load_scenario_config,
    run_scenario,
    sample_mixture,
    with_overrides,
)
from weights import ConcentrationMatrix, SingularDesign

SCENARIOS = Path(__file__).resolve().parent.parent / 'scenarios'


def _small_config(**changes):
    settings = dict(
        M=2,
        means=(0.0, 0.0),
        variances=(1.0, 4.0),
        hypothesis=parse_hypothesis_spec("means-all", 2),
        sample_sizes=(40, 80),
        replications=12,
        alpha=0.05,
        modifications=('ss', 'si', 'ii'),
        seed=123,
        name='small',
    )
    settings.update(changes)
    return ScenarioConfig(**settings)


class TestConcentrationGeneration:
    def test_rows_are_probability_vectors(self, rng):
        P = generate_concentrations(500, 3, rng)
        assert P.P.shape == (500, 3)
        np.testing.assert_allclose(P.P.sum(axis=1), 1.0, atol=1e-12)
        assert np.all((P.P >= 0.0) & (P.P <= 1.0))

    def test_single_component(self, rng):
        np.testing.assert_array_equal(generate_concentrations(10, 1, rng).P, np.ones((10, 1)))

    def test_column_means_approach_uniform_share(self, rng):
        P = generate_concentrations(100_000, 4, rng)
        np.testing.assert_allclose(P.P.mean(axis=0), 0.25, atol=0.005)


class TestSampleMixture:
    def test_pure_design_uses_first_component(self, rng):
        P = ConcentrationMatrix(np.tile([1.0, 0.0], (2000, 1)))
        sample = sample_mixture(P, [5.0, -5.0], [1.0, 1.0], rng)
        assert np.all(sample.labels == 0)
        assert sample.x.mean() == pytest.approx(5.0, abs=0.1)

    def test_label_frequencies_follow_concentrations(self, rng):
        P = generate_concentrations(20_000, 3, rng)
        sample = sample_mixture(P, [0.0, 3.0, -2.0], [1.0, 1.0, 4.0], rng)
        frequencies = np.bincount(sample.labels, minlength=3) / P.N
        np.testing.assert_allclose(frequencies, P.P.mean(axis=0), atol=0.015)
        expected_mean = float(np.mean(P.P @ np.array([0.0, 3.0, -2.0])))
        assert sample.x.mean() == pytest.approx(expected_mean, abs=0.06)

    def test_parameter_count(self, design_4x2, rng):
        with pytest.raises(ValueError):
            sample_mixture(design_4x2, [0.0], [1.0], rng)


class TestScenarioConfig:
    def test_shipped_scenarios_load(self):
        b1 = load_scenario_config(SCENARIOS / 'experiment_b1.env')
        assert b1.M == 3
        assert b1.means == (0.0, 3.0, -2.0)
        assert b1.variances == (1.0, 1.0, 4.0)
        assert b1.hypothesis.kind == 'variance_equality_pair'
        assert b1.hypothesis.indices == (1, 2)
        assert b1.replications == 1000
        assert b1.modifications == ('ss', 'si', 'ii')

        a1 = load_scenario_config(SCENARIOS / 'experiment_a1.env')
        assert a1.variances == (1.0, 4.0, 9.0)
        assert a1.hypothesis.kind == 'mean_homogeneity_all'
        assert not a1.fixed_concentrations

    def test_missing_keys(self, tmp_path):
        path = tmp_path / 'broken.env'
        path.write_text("M=2\nMEANS=0,0\n")
        with pytest.raises(ValueError, match="VARIANCES"):
            load_scenario_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_scenario_config(tmp_path / 'nope.env')

    def test_defaults_and_flags(self, tmp_path):
        path = tmp_path / 'mine.env'
        path.write_text("M=2\nMEANS=0,1\nVARIANCES=1,1\nHYPOTHESIS=means 1 2\n"
                        "SAMPLE_SIZES=30\nFIXED_CONCENTRATIONS=true\nWORKERS=3\n")
        cfg = load_scenario_config(path)
        assert cfg.name == 'mine'
        assert cfg.workers == 3
        assert cfg.sample_sizes == (30,)
        assert cfg.fixed_concentrations

    @pytest.mark.parametrize("changes, message", [
        (dict(variances=(1.0, 0.0)), "variances must be positive"),
        (dict(means=(0.0,)), "need 2 means"),
        (dict(replications=0), "replications"),
        (dict(sample_sizes=(1,)), "sample sizes"),
        (dict(sample_sizes=(40, 80, 40)), "sample sizes must not repeat"),
        (dict(workers=0), "workers must be at least 1"),
        (dict(alpha=1.0), "alpha"),
        (dict(modifications=('sx',)), "modifications"),
        (dict(hypothesis=parse_hypothesis_spec("means-all", 3)), "different number of components"),
    ])
    def test_validation(self, changes, message):
        with pytest.raises(ValueError, match=message):
            _small_config(**changes)

    def test_overrides(self):
        cfg = with_overrides(_small_config(), seed=9, replications=3, sample_sizes=[50], workers=2)
        assert (cfg.seed, cfg.replications, cfg.sample_sizes, cfg.workers) == (9, 3, (50,), 2)
        assert with_overrides(cfg) is cfg


class TestScenarioResult:
    def test_frequencies(self):
        result = ScenarioResult(scenario='t')
        result.add(50, 'ss', {'rejections': 1, 'valid': 8, 'invalid': 2, 'total': 10})
        result.add(50, 'ss', {'rejections': 1, 'valid': 2, 'invalid': 0, 'total': 2})
        assert result.rejection_frequency(50, 'ss') == pytest.approx(0.2)
        assert result.incorrect_covariance_frequency(50, 'ss') == pytest.approx(2 / 12)

    def test_no_valid_replications(self):
        result = ScenarioResult(scenario='t')
        result.add(50, 'si', {'rejections': 0, 'valid': 0, 'invalid': 3, 'total': 3})
        assert np.isnan(result.rejection_frequency(50, 'si'))
        assert result.incorrect_covariance_frequency(50, 'si') == 1.0

    def test_frame_and_csv(self, tmp_path):
        result = ScenarioResult(scenario='t')
        result.add(100, 'ii', {'rejections': 0, 'valid': 1, 'invalid': 0, 'total': 1})
        result.add(50, 'ss', {'rejections': 1, 'valid': 1, 'invalid': 0, 'total': 1})
        frame = result.to_frame()
        assert list(frame.columns) == RESULT_COLUMNS
        assert list(frame['N']) == [50, 100]
        written = pd.read_csv(result.write_csv(tmp_path / 'out.csv'))
        assert list(written['modification']) == ['ss', 'ii']


class TestRunScenario:
    def test_single_replication_smoke(self):
        cfg = _small_config(replications=1, sample_sizes=(60,))
        result = run_scenario(cfg, show_progress=False)
        for modification in ('ss', 'si', 'ii'):
            counts = result.counts[(60, modification)]
            assert counts['total'] == 1
            assert counts['valid'] + counts['invalid'] == 1

    def test_counts_cover_every_replication(self):
        result = run_scenario(_small_config(), chunk_size=5, show_progress=False)
        for n in (40, 80):
            for modification in ('ss', 'si', 'ii'):
                assert result.counts[(n, modification)]['total'] == 12

    def test_independent_of_workers_and_chunking(self):
        cfg = _small_config()
        inline = run_scenario(cfg, workers=1, chunk_size=100, show_progress=False).to_frame()
        pooled = run_scenario(cfg, workers=2, chunk_size=5, show_progress=False).to_frame()
        pd.testing.assert_frame_equal(inline, pooled)

    def test_scenario_workers_are_the_default(self, caplog):
        cfg = _small_config(workers=2, replications=4, sample_sizes=(40,))
        with caplog.at_level(logging.INFO, logger='simulation'):
            pooled = run_scenario(cfg, chunk_size=2, show_progress=False)
        assert "2 worker(s)" in caplog.text
        inline = run_scenario(cfg, workers=1, show_progress=False)
        pd.testing.assert_frame_equal(pooled.to_frame(), inline.to_frame())

    def test_fixed_concentrations_are_reproducible(self):
        cfg = _small_config(fixed_concentrations=True, replications=6)
        first = run_scenario(cfg, show_progress=False).to_frame()
        second = run_scenario(cfg, workers=2, chunk_size=2, show_progress=False).to_frame()
        pd.testing.assert_frame_equal(first, second)

    def test_singular_design_counts_as_incorrect_covariance(self, monkeypatch):
        def singular(*args, **kwargs):
            raise SingularDesign("forced")

        monkeypatch.setattr(simulation, 'run_all_modifications', singular)
        result = run_scenario(_small_config(replications=4, sample_sizes=(40,)), show_progress=False)
        for modification in ('ss', 'si', 'ii'):
            assert result.counts[(40, modification)] == {'rejections': 0, 'valid': 0, 'invalid': 4, 'total': 4}
