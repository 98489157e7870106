import numpy as np
import pytest

from sketchreg.datagen import (
    DataFormatError,
    GenerativeConfig,
    generate_generative,
    load_csv,
    load_dataset,
    load_libsvm,
    random_instance,
    save_csv,
    save_libsvm,
    streams,
    subspace_compatibility,
    to_standard_form,
)
from sketchreg.glm import DataSet, logistic_gradient, logistic_loss
from sketchreg.mu import compute_mu
from sketchreg.sketch import coordinate_sketch, pca_sketch


def same(a: DataSet, b: DataSet):
    return np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


class TestGenerative:
    def test_zero_signal_label_mean(self):
        n = 10_000
        means = [generate_generative(GenerativeConfig(n, 3, beta_true=np.zeros(3), seed=s)).y.mean() for s in range(10)]
        assert abs(np.mean(means)) <= 3 / np.sqrt(n)

    def test_sample_covariance(self):
        X = generate_generative(GenerativeConfig(10_000, 5, seed=1)).X
        S = X.T @ X / X.shape[0]
        assert np.linalg.norm(S - np.eye(5), 2) <= 0.1

    def test_diagonal_and_full_covariance(self):
        X = generate_generative(GenerativeConfig(20_000, 3, covariance=np.array([4.0, 1.0, 0.25]), seed=2)).X
        assert np.allclose(np.var(X, axis=0), [4.0, 1.0, 0.25], rtol=0.05)
        S = np.array([[2.0, 0.5], [0.5, 1.0]])
        X = generate_generative(GenerativeConfig(20_000, 2, covariance=S, sigma_x=2.0, seed=3)).X
        assert np.linalg.norm(X.T @ X / 20_000 - 4 * S, 2) <= 0.25

    def test_singular_psd_covariance(self):
        cfg = GenerativeConfig(10, 2, covariance=np.ones((2, 2)))
        L = cfg.cholesky
        assert np.allclose(L @ L.T, np.ones((2, 2)))

    def test_bad_covariance(self):
        with pytest.raises(ValueError):
            GenerativeConfig(10, 2, covariance=np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ValueError):
            GenerativeConfig(10, 2, covariance=np.array([[1.0, 0.3], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            GenerativeConfig(10, 2, covariance="banded")
        with pytest.raises(ValueError):
            GenerativeConfig(0, 2)

    def test_deterministic(self):
        cfg = GenerativeConfig(50, 4, seed=9)
        assert same(generate_generative(cfg), generate_generative(cfg))
        assert not same(generate_generative(cfg), generate_generative(GenerativeConfig(50, 4, seed=10)))
        assert same(random_instance(20, 3, seed=4), random_instance(20, 3, seed=4))

    def test_streams_independent(self):
        a, b = streams(5)
        assert not np.array_equal(a.random(4), b.random(4))
        c, _ = streams(5)
        a2, _ = streams(5)
        assert np.array_equal(c.random(4), a2.random(4))

    def test_default_beta_is_unit(self):
        assert np.array_equal(GenerativeConfig(5, 3).beta_true, [1.0, 0.0, 0.0])

    def test_non_separable_frequency(self):
        d = 3
        ok = sum(
            compute_mu(generate_generative(GenerativeConfig(50 * d, d, seed=s))).status == "finite" for s in range(20)
        )
        assert ok / 20 >= 0.95


class TestStandardForm:
    def test_all_minus_one_unchanged(self):
        d = DataSet(np.array([[1.0, 2.0], [3.0, -1.0]]), [-1, -1])
        assert np.array_equal(to_standard_form(d).X, d.X)

    def test_loss_preserved(self):
        d = random_instance(40, 5, seed=1)
        s = to_standard_form(d)
        rng = np.random.default_rng(1)
        for beta in rng.standard_normal((20, 5)) * 2:
            assert abs(logistic_loss(d, beta) - logistic_loss(s, beta)) <= 1e-12
            g1, g2 = logistic_gradient(d, beta), logistic_gradient(s, beta)
            assert abs(np.linalg.norm(g1) - np.linalg.norm(g2)) <= 1e-10

    def test_idempotent(self):
        s = to_standard_form(random_instance(10, 3, seed=2))
        assert same(to_standard_form(s), s)

    def test_mu_preserved(self):
        d = random_instance(40, 3, seed=3, signal=0.5)
        a, b = compute_mu(d), compute_mu(to_standard_form(d))
        assert a.status == "finite"
        assert abs(a.mu - b.mu) <= 1e-10 * a.mu


class TestCsv:
    def test_three_line_example(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,0.5,2.0\n-1,1.0,-1.0\n1,0.0,0.0\n")
        d = load_csv(p)
        assert (d.n, d.d) == (3, 2)
        assert np.array_equal(d.y, [1, -1, 1])
        assert np.array_equal(d.X[1], [1.0, -1.0])

    def test_zero_one_labels(self, tmp_path):
        p = tmp_path / "b.csv"
        p.write_text("1,0.5\n0,1.0\n")
        with pytest.raises(DataFormatError, match=":2"):
            load_csv(p)
        assert np.array_equal(load_csv(p, recode01=True).y, [1, -1])

    def test_header_and_label_column(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("a,b,label\n0.5,2,1\n\n1,-1,-1\n")
        d = load_csv(p, has_header=True, label_column=-1)
        assert d.feature_names == ["a", "b"]
        assert np.array_equal(d.X, [[0.5, 2.0], [1.0, -1.0]])
        assert np.array_equal(d.y, [1, -1])

    @pytest.mark.parametrize(
        "text,where",
        [
            ("1,0.5\n1,nan\n", ":2"),
            ("1,inf\n", ":1"),
            ("1,0.5\n-1,abc\n", ":2"),
            ("1,0.5\n-1,0.5,3\n", ":2"),
            ("2,0.5\n", ":1"),
            ("", "no data"),
        ],
    )
    def test_errors_name_the_line(self, tmp_path, text, where):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(DataFormatError, match=where):
            load_csv(p)

    def test_round_trip(self, tmp_path):
        d = random_instance(25, 4, seed=7, scale=1e-3)
        p = tmp_path / "rt.csv"
        save_csv(d, p, header=True)
        back = load_csv(p, has_header=True)
        assert np.max(np.abs(back.X - d.X)) <= 1e-12
        assert np.array_equal(back.X, d.X) and np.array_equal(back.y, d.y)


class TestLibsvm:
    def test_example_line(self, tmp_path):
        p = tmp_path / "a.svm"
        p.write_text("+1 1:0.5 3:2.0\n")
        d = load_libsvm(p)
        assert np.array_equal(d.X, [[0.5, 0.0, 2.0]]) and d.y[0] == 1

    def test_empty_feature_list(self, tmp_path):
        p = tmp_path / "b.svm"
        p.write_text("-1\n1 2:1.5  # comment\n")
        d = load_libsvm(p)
        assert np.array_equal(d.X, [[0.0, 0.0], [0.0, 1.5]])

    def test_d_hint(self, tmp_path):
        p = tmp_path / "c.svm"
        p.write_text("1 1:1\n")
        assert load_libsvm(p, d_hint=4).d == 4
        with pytest.raises(DataFormatError):
            load_libsvm(p, d_hint=0)

    @pytest.mark.parametrize(
        "text,where",
        [
            ("1 0:1.0\n", "token 2"),
            ("1 2:1.0 1:3\n", "token 3"),
            ("1 1:1.0\n-1 1-2\n", ":2 token 2"),
            ("1 1:nan\n", "token 2"),
            ("1 x:1\n", "token 2"),
            ("0 1:1\n", ":1"),
        ],
    )
    def test_errors_name_the_token(self, tmp_path, text, where):
        p = tmp_path / "bad.svm"
        p.write_text(text)
        with pytest.raises(DataFormatError, match=where):
            load_libsvm(p)

    def test_cross_format(self, tmp_path):
        (tmp_path / "a.svm").write_text("1 1:0.5 3:2.0\n-1 2:1.0\n1\n")
        (tmp_path / "a.csv").write_text("1,0.5,0,2.0\n-1,0,1.0,0\n1,0,0,0\n")
        assert same(load_libsvm(tmp_path / "a.svm"), load_csv(tmp_path / "a.csv"))

    def test_round_trip(self, tmp_path):
        d = random_instance(15, 5, seed=8)
        X = d.X.copy()
        X[X < 0.2] = 0.0  # some sparsity
        d = DataSet(X, d.y)
        save_libsvm(d, tmp_path / "rt.svm")
        back = load_libsvm(tmp_path / "rt.svm", d_hint=5)
        assert same(back, d)
        save_csv(d, tmp_path / "rt.csv")
        assert same(load_dataset(tmp_path / "rt.csv", "csv"), back)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            load_dataset(tmp_path / "x", "arff")


def test_subspace_compatibility():
    assert subspace_compatibility(coordinate_sketch(5, [0, 2, 4])) == pytest.approx(np.sqrt(3))
    assert subspace_compatibility(pca_sketch(np.eye(4), 2)) is None
