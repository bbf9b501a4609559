"""Loaders, splitting, encoders, exports, and synthetic generators.

Core claims:
    - the three loaders parse the published file layouts, apply the
      documented filters/binning, and produce dense 0-based encodings
    - splitting is a seeded exhaustive partition and continuous
      standardization never sees test rows
    - the planted-structure generators deliver what they plant
    - the weak-dependence joint hits its requested chi-square level exactly
"""

import numpy as np
import pandas as pd
import pytest

from fairmaxcorr import datasets as ds
from fairmaxcorr.discrete import hgr_k
from fairmaxcorr.errors import IngestionError, InputError
from fairmaxcorr.metrics import knn_mi
from fairmaxcorr.probability import JointPmf, estimate_joint


class TestLoadCompas:
    def test_fixture_shape(self, compas_path):
        data = ds.load_compas(compas_path)
        assert (data.card_x, data.card_y, data.card_d) == (18, 2, 2)
        assert data.n > 4000
        assert set(np.unique(data.d)) == {0, 1}

    def test_binning_oracle_row(self, tmp_path):
        # felony, 5 priors, middle age bracket: x = 0*9 + 2*3 + 1 = 7
        df = pd.DataFrame(
            {
                "c_charge_degree": ["F", "M"],
                "priors_count": [5, 0],
                "age_cat": ["25 - 45", "Less than 25"],
                "race": ["African-American", "Caucasian"],
                "two_year_recid": [1, 0],
            }
        )
        path = tmp_path / "mini.csv"
        df.to_csv(path, index=False)
        data = ds.load_compas(path, apply_standard_filters=False)
        assert data.x[0] == 7 and data.y[0] == 1 and data.d[0] == 0
        assert data.x[1] == 1 * 9 + 0 * 3 + 0 and data.d[1] == 1

    def test_race_filter(self, tmp_path):
        df = pd.DataFrame(
            {
                "c_charge_degree": ["F", "F"],
                "priors_count": [0, 0],
                "age_cat": ["25 - 45", "25 - 45"],
                "race": ["Hispanic", "Caucasian"],
                "two_year_recid": [1, 0],
            }
        )
        path = tmp_path / "mini.csv"
        df.to_csv(path, index=False)
        data = ds.load_compas(path, apply_standard_filters=False)
        assert data.n == 1

    def test_standard_filters_drop_rows(self, compas_path):
        unfiltered = ds.load_compas(compas_path, apply_standard_filters=False)
        filtered = ds.load_compas(compas_path)
        assert filtered.n < unfiltered.n

    def test_missing_column_reported(self, tmp_path):
        path = tmp_path / "broken.csv"
        pd.DataFrame({"race": ["Caucasian"]}).to_csv(path, index=False)
        with pytest.raises(IngestionError, match="c_charge_degree"):
            ds.load_compas(path)

    def test_alphabet_is_product_of_bins(self, compas_path):
        data = ds.load_compas(compas_path)
        enc = data.encoders
        assert data.card_x == (
            len(enc["charge_degree"]) * len(enc["priors_bin"]) * len(enc["age_bin"])
        )

    def test_file_not_found(self):
        with pytest.raises(IngestionError, match="not found"):
            ds.load_compas("/no/such/file.csv")


class TestLoadAdult:
    def test_fixture_shape(self, adult_path):
        data = ds.load_adult(adult_path)
        assert (data.card_x, data.card_y, data.card_d) == (144, 2, 2)
        assert data.n == 6000

    def test_decade_and_education_binning(self, tmp_path):
        rows = [
            [37, "Private", 1, "HS-grad", 9, "m", "o", "r", "White", "Male", 0, 0, 40,
             "United-States", ">50K"],
            [17, "Private", 1, "HS-grad", 1, "m", "o", "r", "White", "Female", 0, 0, 40,
             "United-States", "<=50K."],
            [90, "Private", 1, "Doctorate", 16, "m", "o", "r", "White", "Male", 0, 0, 40,
             "United-States", "<=50K"],
        ]
        path = tmp_path / "mini.data"
        pd.DataFrame(rows).to_csv(path, index=False, header=False)
        data = ds.load_adult(path)
        # age 37 -> decade 3 -> bin index 2; education 9 -> index 8
        assert data.x[0] == 2 * 16 + 8
        assert data.y[0] == 1 and data.y[1] == 0
        # clamped decades stay within the alphabet
        assert data.x[1] == 0 * 16 + 0
        assert data.x[2] == 8 * 16 + 15
        assert data.d.tolist() == [1, 0, 1]

    def test_header_variant_accepted(self, tmp_path):
        df = pd.DataFrame(
            {
                "age": [40],
                "education-num": [10],
                "sex": ["Female"],
                "income": [">50K"],
            }
        )
        path = tmp_path / "with_header.csv"
        df.to_csv(path, index=False)
        data = ds.load_adult(path)
        assert data.n == 1 and data.y[0] == 1 and data.d[0] == 0

    def test_bad_income_value(self, tmp_path):
        path = tmp_path / "bad.csv"
        pd.DataFrame(
            {"age": [40], "education-num": [10], "sex": ["Male"], "income": ["lots"]}
        ).to_csv(path, index=False)
        with pytest.raises(IngestionError, match="income"):
            ds.load_adult(path)


class TestLoadCc:
    def test_fixture_shape(self, cc_path):
        data = ds.load_cc(cc_path)
        assert data.n == 1994
        assert data.x.shape[1] <= 121
        assert data.x.shape[1] == len(data.feature_names) == 98
        assert ds.CC_SENSITIVE not in data.feature_names
        assert ds.CC_TARGET not in data.feature_names

    def test_missing_columns_dropped_not_imputed(self, cc_path):
        data = ds.load_cc(cc_path)
        assert "LemasSwornFT" not in data.feature_names
        assert "OtherPerCap" not in data.feature_names

    def test_values_are_finite(self, cc_path):
        data = ds.load_cc(cc_path)
        assert np.all(np.isfinite(data.x))
        assert np.all((data.y >= 0) & (data.y <= 1))

    def test_malformed_cell_located(self, tmp_path, cc_path):
        frame = pd.read_csv(cc_path, header=None, dtype=str)
        frame.iloc[7, 5] = "noodle"  # population column, row 7
        path = tmp_path / "broken.csv"
        frame.to_csv(path, index=False, header=False)
        with pytest.raises(IngestionError, match="row 7, column population"):
            ds.load_cc(path)

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "short.csv"
        pd.DataFrame(np.zeros((3, 10))).to_csv(path, index=False, header=False)
        with pytest.raises(IngestionError, match="expected 128"):
            ds.load_cc(path)


class TestSplit:
    def test_fraction_sizes(self):
        data = ds.synth_discrete("coins", 100, seed=0)
        train, test = ds.split(data, ds.SplitSpec(train_fraction=0.8, seed=1))
        assert (train.n, test.n) == (80, 20)

    def test_same_seed_same_partition(self):
        data = ds.synth_discrete("coins", 500, seed=0)
        a = ds.split(data, ds.SplitSpec(train_fraction=0.7, seed=9))
        b = ds.split(data, ds.SplitSpec(train_fraction=0.7, seed=9))
        np.testing.assert_array_equal(a[0].x, b[0].x)
        np.testing.assert_array_equal(a[1].x, b[1].x)

    def test_union_is_original_multiset(self):
        data = ds.synth_discrete("coins", 300, seed=2)
        train, test = ds.split(data, ds.SplitSpec(train_fraction=0.8, seed=3))
        combined = np.sort(np.concatenate([train.x, test.x]))
        np.testing.assert_array_equal(combined, np.sort(data.x))

    def test_explicit_counts(self, cc_path):
        data = ds.load_cc(cc_path)
        train, test = ds.split(data, ds.SplitSpec(train_count=1794, test_count=200, seed=0))
        assert (train.n, test.n) == (1794, 200)

    def test_train_standardization_statistics(self, cc_path):
        data = ds.load_cc(cc_path)
        train, test = ds.split(
            data, ds.SplitSpec(train_count=1794, test_count=200, seed=0)
        )
        assert np.max(np.abs(train.x.mean(axis=0))) < 1e-9
        np.testing.assert_allclose(train.x.var(axis=0), 1.0, atol=1e-6)
        # test columns standardized with train statistics, not their own
        assert np.max(np.abs(test.x.mean(axis=0))) > 1e-6
        assert train.standardization is not None

    def test_no_test_leakage_into_statistics(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((50, 1))
        data = ds.ContinuousDataset(x, x[:, 0].copy(), x[:, 0].copy())
        train, _ = ds.split(data, ds.SplitSpec(train_fraction=0.8, seed=5))
        x2 = x.copy()
        # changing future test rows must not move the train statistics
        perm = np.random.default_rng(5).permutation(50)
        test_rows = perm[40:]
        x2[test_rows] += 100.0
        data2 = ds.ContinuousDataset(x2, x2[:, 0].copy(), x2[:, 0].copy())
        train2, _ = ds.split(data2, ds.SplitSpec(train_fraction=0.8, seed=5))
        np.testing.assert_allclose(train.x, train2.x)

    def test_spec_validation(self):
        data = ds.synth_discrete("coins", 10, seed=0)
        with pytest.raises(InputError):
            ds.split(data, ds.SplitSpec(train_fraction=1.2))
        with pytest.raises(InputError):
            ds.split(data, ds.SplitSpec(train_fraction=0.8, train_count=8, test_count=2))
        with pytest.raises(InputError):
            ds.split(data, ds.SplitSpec(train_count=5, test_count=4))
        with pytest.raises(InputError):
            ds.split(data, ds.SplitSpec())


class TestEncoders:
    def test_roundtrip_all_observed_categories(self, compas_path):
        data = ds.load_compas(compas_path)
        for variable, table in data.encoders.items():
            if variable == "x_components":
                continue
            for value in table:
                idx = ds.encode_category(data.encoders, variable, value)
                assert ds.decode_category(data.encoders, variable, idx) == value

    def test_unknown_category_rejected(self, compas_path):
        data = ds.load_compas(compas_path)
        with pytest.raises(InputError):
            ds.encode_category(data.encoders, "race", "Martian")
        with pytest.raises(InputError):
            ds.decode_category(data.encoders, "race", 5)


class TestSynthDiscrete:
    def test_independent_structure(self):
        data = ds.synth_discrete("independent", 100_000, seed=0)
        joint_xd = estimate_joint(np.column_stack([data.x, data.d]), 4, 2)
        assert hgr_k(joint_xd, 1) < 0.02
        joint_xy = estimate_joint(np.column_stack([data.x, data.y]), 4, 2)
        assert hgr_k(joint_xy, 1) > 0.9

    def test_coins_structure(self):
        data = ds.synth_discrete("coins", 50_000, seed=1)
        np.testing.assert_array_equal(data.x, 2 * data.y + data.d)
        joint_yd = estimate_joint(np.column_stack([data.y, data.d]), 2, 2)
        assert hgr_k(joint_yd, 1) < 0.02

    def test_confounded_structure(self):
        data = ds.synth_discrete("confounded", 5000, seed=2)
        np.testing.assert_array_equal(data.y, data.d)
        assert knn_mi(data.y.astype(float), data.d.astype(float)) > 0.3

    def test_biased_structure(self):
        data = ds.synth_discrete("biased", 50_000, seed=3)
        agree = np.mean(data.y == data.d)
        assert agree == pytest.approx(0.8, abs=0.01)

    def test_eps_dependent_chi_square_level(self):
        data = ds.synth_discrete("eps_dependent", 10, seed=4, chi2=0.05)
        assert data.card_x == 4 and data.card_y == 3
        joint = ds.eps_dependent_joint(4, 3, float(np.sqrt(0.05)), seed=4)
        product = np.outer(joint.marginal_a, joint.marginal_b)
        chi2 = float(np.sum((joint.probs - product) ** 2 / product))
        assert chi2 == pytest.approx(0.05, rel=0.2)

    def test_unknown_kind(self):
        with pytest.raises(InputError):
            ds.synth_discrete("nope", 10)
        with pytest.raises(InputError):
            ds.synth_discrete("biased", 10, seed=0, bogus=1)


class TestSynthContinuous:
    def test_independent_structure(self):
        data = ds.synth_continuous("independent", 5000, seed=0)
        np.testing.assert_array_equal(data.y, data.x[:, 0])
        assert abs(knn_mi(data.y, data.d)) < 0.02

    def test_confounded_structure(self):
        data = ds.synth_continuous("confounded", 1000, seed=1)
        np.testing.assert_array_equal(data.y, data.d)

    def test_planted_ci_structure(self):
        from fairmaxcorr.metrics import knn_cmi

        data = ds.synth_continuous("planted_ci", 5000, seed=2)
        assert knn_cmi(data.x[:, 0], data.d, data.y) < 0.05
        assert knn_mi(data.x[:, 0], data.d) > 0.3

    def test_planted_bias_structure(self):
        data = ds.synth_continuous("planted_bias", 5000, seed=3)
        assert abs(np.corrcoef(data.x[:, 1], data.d)[0, 1]) > 0.9
        assert abs(np.corrcoef(data.x[:, 0], data.d)[0, 1]) < 0.05


class TestEpsDependentJoint:
    def test_marginals_preserved_and_positive(self):
        joint = ds.eps_dependent_joint(5, 4, 0.3, seed=7)
        assert np.all(joint.probs > 0)
        assert isinstance(joint, JointPmf)

    def test_amplitude_is_exact_chi_square_root(self):
        for amplitude in (0.05, 0.2):
            joint = ds.eps_dependent_joint(4, 4, amplitude, seed=8)
            product = np.outer(joint.marginal_a, joint.marginal_b)
            chi2 = float(np.sum((joint.probs - product) ** 2 / product))
            assert chi2 == pytest.approx(amplitude**2, rel=1e-6)

    def test_fixed_direction_across_amplitudes(self):
        j1 = ds.eps_dependent_joint(4, 3, 0.1, seed=9)
        j2 = ds.eps_dependent_joint(4, 3, 0.2, seed=9)
        e1 = j1.probs / np.outer(j1.marginal_a, j1.marginal_b) - 1.0
        e2 = j2.probs / np.outer(j2.marginal_a, j2.marginal_b) - 1.0
        np.testing.assert_allclose(2.0 * e1, e2, atol=1e-12)

    def test_amplitude_validation(self):
        with pytest.raises(InputError):
            ds.eps_dependent_joint(4, 3, 1.5)
        with pytest.raises(InputError):
            ds.eps_dependent_joint(1, 3, 0.1)


class TestExports:
    def test_discrete_roundtrip(self, tmp_path):
        data = ds.synth_discrete("coins", 50, seed=0)
        path = tmp_path / "out.csv"
        ds.export_discrete(data, path)
        frame = pd.read_csv(path)
        np.testing.assert_array_equal(frame["x"], data.x)
        import json

        sidecar = json.loads((tmp_path / "out.csv.encoders.json").read_text())
        assert sidecar["card_x"] == 4

    def test_continuous_roundtrip(self, tmp_path):
        data = ds.synth_continuous("planted_bias", 40, seed=1)
        path = tmp_path / "out.csv"
        ds.export_continuous(data, path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["x0", "x1", "y", "d"]
        np.testing.assert_allclose(frame["y"], data.y)
