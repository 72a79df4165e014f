import pytest

from stylegroup.classify import classify_cohort
from stylegroup.dsl import parse_rulebase
from stylegroup.grouping import GroupingParams, assign_groups
from stylegroup.ingest import load_behaviors
from stylegroup.simulate import (
    CohortSpec,
    ScoreModel,
    UnreachableLabelError,
    default_cohort_spec,
    generate,
    generate_scores,
    write_behaviors_csv,
)
from stylegroup.stats import two_sample_t

SIGNATURES = (
    ("reactive", "sensory", "visual", "consecutive"),
    ("reflection", "intuitive", "verbal", "sequential_global"),
    ("reactive", "intuitive", "visual", "sequential_global"),
    ("reflection", "sensory", "verbal", "consecutive"),
)


def _spec(counts=20, noise=0.0, seed=1, model=None):
    return CohortSpec(
        counts=tuple((s, counts) for s in SIGNATURES),
        noise_sigma=noise,
        seed=seed,
        score_model=model,
    )


def test_zero_noise_features_sit_on_prototypes(rb):
    spec = CohortSpec(counts=((("reflection", "sensory", "verbal", "consecutive"), 1),), seed=2)
    truth, records = generate(spec, rb)
    features = records[0].features
    # the reflection rule wants low participation, much test/training time
    assert features["discussion_participation"] == 1.5
    assert features["chat_participation"] == 1.5
    assert features["test_time"] == 87.5
    assert features["training_time"] == 87.5
    assert features["connected_people"] == 0.5
    assert features["troubleshooting_participation"] == 12.5


def test_zero_noise_recovery(rb):
    truth, records = generate(_spec(counts=10, noise=0.0, seed=4), rb)
    profiles, failures = classify_cohort(records, rb)
    assert not failures
    truth_map = dict(truth)
    assert all(p.signature == truth_map[p.learner_id] for p in profiles)


def test_generate_deterministic(rb, tmp_path):
    spec = _spec(counts=5, noise=0.1, seed=99)
    first = generate(spec, rb)
    second = generate(spec, rb)
    assert first == second
    write_behaviors_csv(first[1], rb, tmp_path / "a.csv")
    write_behaviors_csv(second[1], rb, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_generate_unreachable_label(rb):
    # no rule in the bundled base produces the pure "global" pole
    spec = CohortSpec(counts=((("reactive", "sensory", "visual", "global"), 1),), seed=1)
    with pytest.raises(UnreachableLabelError):
        generate(spec, rb)


def test_generate_clamps_to_universe(rb):
    truth, records = generate(_spec(counts=10, noise=0.5, seed=6), rb)
    for record in records:
        for name, value in record.features.items():
            lo, hi = rb.variable(name).universe
            assert lo <= value <= hi


def test_recovery_rate_non_increasing_in_noise(rb):
    sigmas = (0.0, 0.05, 0.15, 0.3)
    mean_rates = []
    for sigma in sigmas:
        rates = []
        for seed in range(5):
            truth, records = generate(_spec(counts=6, noise=sigma, seed=seed), rb)
            profiles, failures = classify_cohort(records, rb)
            truth_map = dict(truth)
            hits = sum(p.signature == truth_map[p.learner_id] for p in profiles)
            rates.append(hits / len(truth))
        mean_rates.append(sum(rates) / len(rates))
    assert mean_rates[0] == 1.0
    for earlier, later in zip(mean_rates, mean_rates[1:]):
        assert later <= earlier + 1e-9, mean_rates


def test_default_cohort_spec_round_trips_json(rb):
    spec = default_cohort_spec(seed=5)
    assert spec.total == 420
    assert CohortSpec.from_json_dict(spec.to_json_dict()) == spec


def test_behaviors_csv_round_trip_through_ingest(rb, tmp_path):
    spec = _spec(counts=4, noise=0.12, seed=13)
    truth, records = generate(spec, rb)
    path = tmp_path / "behaviors.csv"
    write_behaviors_csv(records, rb, path)
    loaded, report = load_behaviors(path, list(rb.variables), policy="strict")
    assert {r.learner_id: r.features for r in loaded} == {
        r.learner_id: r.features for r in records
    }


def test_behaviors_csv_inverts_max_expected_scaling(tmp_path):
    rb = parse_rulebase(
        """
        input a_minutes dim=processing max_expected=200
        output processing_score dim=processing universe=[0,12] { calm=(0,0,6,8) }

        RULE only: IF a_minutes IS low THEN processing_score IS calm
        """
    )
    spec = CohortSpec(counts=((("calm",), 3),), noise_sigma=0.0, seed=8)
    truth, records = generate(spec, rb)
    path = tmp_path / "behaviors.csv"
    write_behaviors_csv(records, rb, path)
    # file holds raw minutes: 12.5% of 200
    assert ",a_minutes,25.0" in path.read_text()
    loaded, _ = load_behaviors(path, list(rb.variables), policy="strict")
    assert loaded[0].features["a_minutes"] == pytest.approx(12.5, abs=1e-12)


# -- scores --------------------------------------------------------------------


def _assignment(rb, spec):
    truth, records = generate(spec, rb)
    profiles, _ = classify_cohort(records, rb)
    params = GroupingParams(control_fraction=0.25, seed=31, target_k=4, min_size=2)
    return truth, assign_groups(profiles, params)


def test_scores_zero_sigma_hit_the_means(rb):
    model = ScoreModel(treated_mean=17.65, control_mean=12.6, sigma=0.0)
    truth, assignment = _assignment(rb, _spec(counts=8, seed=23))
    samples, control = generate_scores(truth, assignment, model, seed=23)
    for sample in samples:
        assert all(v == 17.65 for v in sample.values)
    assert control is not None
    assert all(v == 12.6 for v in control.values)


def test_scores_signature_specific_means(rb):
    model = ScoreModel(
        treated_mean=17.0,
        control_mean=12.6,
        sigma=0.0,
        signature_means=((SIGNATURES[0], 19.0),),
    )
    truth, assignment = _assignment(rb, _spec(counts=8, seed=29))
    truth_map = dict(truth)
    samples, _ = generate_scores(truth, assignment, model, seed=29)
    for group, sample in zip(assignment.groups, samples):
        for member, value in zip(group.members, sample.values):
            expected = 19.0 if truth_map[member] == SIGNATURES[0] else 17.0
            assert value == expected


def test_scores_clamped_to_range(rb):
    model = ScoreModel(treated_mean=19.5, control_mean=0.5, sigma=4.0)
    truth, assignment = _assignment(rb, _spec(counts=8, seed=37))
    samples, control = generate_scores(truth, assignment, model, seed=37)
    values = [v for s in samples for v in s.values] + list(control.values)
    assert all(0.0 <= v <= 20.0 for v in values)


def test_scores_paper_style_separation_is_significant(rb):
    model = ScoreModel(treated_mean=17.65, control_mean=12.6, sigma=2.5)
    truth, assignment = _assignment(rb, _spec(counts=50, seed=41))
    samples, control = generate_scores(truth, assignment, model, seed=41)
    assert control.n >= 30
    for sample in samples:
        assert sample.n >= 30
        result = two_sample_t(sample, control, variant="welch", alpha=0.05)
        assert result.significant


def test_scores_empty_control_absent(rb):
    from stylegroup.grouping import GroupAssignment

    model = ScoreModel(treated_mean=17.0, control_mean=12.0, sigma=1.0)
    truth, assignment = _assignment(rb, _spec(counts=8, seed=43))
    no_control = GroupAssignment(groups=assignment.groups, control=(), params=assignment.params)
    samples, control = generate_scores(truth, no_control, model, seed=43)
    assert control is None
    assert samples
