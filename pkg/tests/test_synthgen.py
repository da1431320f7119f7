import numpy as np
import pytest

from fairmix.errors import InputError
from fairmix.synthgen import SynthSpec, generate


class TestGenerate:
    def test_row_count(self):
        ds = generate(SynthSpec(n_subjects=26, sessions_per_subject=4, seed=1))
        assert ds.n_samples == 104

    def test_subjects_share_attributes(self):
        ds = generate(SynthSpec(n_subjects=10, sessions_per_subject=3, seed=2))
        by_subject = {}
        for m in ds.meta:
            by_subject.setdefault(m.subject_id, set()).add(m.attributes)
        assert all(len(v) == 1 for v in by_subject.values())

    def test_determinism(self):
        spec = SynthSpec(n_subjects=8, seed=33)
        a, b = generate(spec), generate(spec)
        assert a.meta == b.meta
        for t1, t2 in zip(a.modalities, b.modalities):
            np.testing.assert_array_equal(t1.samples, t2.samples)

    def test_zero_separation_means_no_signal(self):
        spec = SynthSpec(
            n_subjects=100, sessions_per_subject=2,
            separation_majority=0.0, separation_minority=0.0, seed=3,
        )
        ds = generate(spec)
        X = ds.modality("face").samples
        y = ds.labels()
        gap = np.linalg.norm(X[y == 1].mean(axis=0) - X[y == 0].mean(axis=0))
        assert gap < 0.3  # class means coincide up to sampling noise

    def test_separation_controls_class_gap(self):
        spec = SynthSpec(n_subjects=200, sessions_per_subject=2,
                         separation_majority=3.0, separation_minority=3.0, seed=4)
        ds = generate(spec)
        X = ds.modality("face").samples
        y = ds.labels()
        gap = np.linalg.norm(X[y == 1].mean(axis=0) - X[y == 0].mean(axis=0))
        assert 2.5 < gap < 3.5

    def test_marginal_fidelity_over_seeds(self):
        # realized majority share within 3 binomial standard errors
        prop, n = 0.7, 50
        se = np.sqrt(prop * (1 - prop) / n)
        shares = []
        for seed in range(100):
            spec = SynthSpec(n_subjects=n, sessions_per_subject=1,
                             attribute_props=(("gender", prop),), seed=seed)
            ds = generate(spec)
            shares.append(ds.attribute_values("gender").mean())
        assert abs(np.mean(shares) - prop) < 3 * se / np.sqrt(100)

    def test_single_group_warns(self):
        with pytest.warns(UserWarning, match="single group"):
            generate(SynthSpec(n_subjects=5, attribute_props=(("gender", 1.0),), seed=0))

    def test_invalid_spec(self):
        with pytest.raises(InputError):
            SynthSpec(n_subjects=0)
        with pytest.raises(InputError):
            SynthSpec(noise_std=0.0)
