import json

import numpy as np
import pytest

from zibeta import io as zio
from zibeta.errors import IngestionError
from zibeta.mcmc import SamplerConfig, run_chain, summarize
from zibeta.model import Dataset, ModelSpec, PriorSpec
from zibeta.simgen import generate, named_scenario


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestDataset:
    def test_round_trip(self, tmp_path):
        train, _ = generate(named_scenario("sim2.1", seed=3))
        p = zio.write_dataset(tmp_path / "train.csv", train.data)
        back = zio.read_dataset(p)
        d = train.data
        assert np.array_equal(back.y, d.y) and np.array_equal(back.X, d.X)
        assert np.array_equal(back.G, d.G) and np.array_equal(back.coords, d.coords)
        assert back.x_names == d.x_names and back.g_names == d.g_names

    def test_layout(self, tmp_path):
        d = zio.read_dataset(write(tmp_path, "y,x_a,g_b,g_c\n0,1,2,3\n0.5,4,5,6\n"))
        assert d.X.shape == (2, 2) and d.G.shape == (2, 3) and d.coords is None
        assert np.array_equal(d.X[:, 0], [1, 1]) and d.g_names == ("intercept", "g_b", "g_c")

    def test_no_covariates(self, tmp_path):
        d = zio.read_dataset(write(tmp_path, "y\n0\n0.3\n"))
        assert d.X.shape == (2, 1) and d.G.shape == (2, 1)

    def test_new_sites_without_y(self, tmp_path):
        d = zio.read_dataset(write(tmp_path, "x_a,s1,s2\n1,0,0\n2,1,1\n"), require_y=False)
        assert d.n == 2 and d.coords.shape == (2, 2)

    def test_standardize(self, tmp_path):
        d = zio.read_dataset(write(tmp_path, "y,x_a\n0,1\n0.2,2\n0.4,3\n"), standardize=True)
        assert np.allclose(d.X[:, 1], [-1, 0, 1])

    @pytest.mark.parametrize("text,fragment", [
        ("x_a\n1\n", "'y'"),
        ("y,x_a\n0,1\n0.2\n", "rows 2"),
        ("y,x_a\n0,abc\n", "non-numeric"),
        ("y,x_a\n0,1\n0.1,nan\n0.2,inf\n", "rows 2, 3"),
        ("y\n0.5\n1.0\n", "offending rows 2"),
        ("y\n-0.1\n", "[0, 1)"),
        ("y,s1\n0,1\n", "both s1 and s2"),
        ("y,y\n0,0\n", "duplicate"),
        ("y\n", "no data rows"),
        ("", "header"),
    ])
    def test_rejects(self, tmp_path, text, fragment):
        with pytest.raises(IngestionError) as exc:
            zio.read_dataset(write(tmp_path, text))
        assert fragment in str(exc.value)

    def test_constant_column(self, tmp_path):
        with pytest.raises(IngestionError, match="constant"):
            zio.read_dataset(write(tmp_path, "y,x_a\n0,1\n0.2,1\n"), standardize=True)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            zio.read_dataset(tmp_path / "absent.csv")


@pytest.fixture(scope="module")
def chain():
    train, _ = generate(named_scenario("sim1.1", seed=1))
    return run_chain(train.data, ModelSpec("m1"), PriorSpec(), SamplerConfig(300, 100, 2, seed=5),
                     np.random.default_rng(5))


class TestPersistence:
    def test_chain_round_trip(self, tmp_path, chain):
        zio.write_chain(tmp_path, chain)
        back = zio.read_chain(tmp_path)
        assert back.columns == chain.columns and np.array_equal(back.samples, chain.samples)
        assert back.kind == chain.kind and back.config == chain.config
        assert back.x_names == chain.x_names and back.acceptance == pytest.approx(chain.acceptance)
        assert np.array_equal(zio.read_chain(tmp_path / "chain.csv").samples, chain.samples)

    def test_chain_missing_meta(self, tmp_path, chain):
        zio.write_chain(tmp_path, chain)
        (tmp_path / "chain_meta.json").unlink()
        with pytest.raises(IngestionError):
            zio.read_chain(tmp_path)

    def test_summary_file(self, tmp_path, chain):
        p = zio.write_summary(tmp_path / "s.csv", summarize(chain, ["gamma_0", "psi"]), chain)
        header, rows = zio.read_table(p)
        assert header == ["parameter", "covariate", "mean", "lower95", "upper95"]
        assert rows[0][:2] == ["gamma_0", "intercept"] and rows[1][0] == "psi"
        assert float(rows[1][3]) <= float(rows[1][2]) <= float(rows[1][4])

    def test_truth(self, tmp_path):
        train, test = generate(named_scenario("sim1.1", seed=2))
        p = zio.write_truth(tmp_path / "truth.csv", train, test)
        src = zio.read_truth_sources(p)
        assert src.size == test.data.n
        assert np.array_equal(src == "positive", test.data.y > 0)
        assert zio.read_truth_sources(p, "train").size == train.data.n


class TestFiles:
    def test_atomic_overwrite(self, tmp_path):
        p = tmp_path / "sub" / "f.txt"
        zio.atomic_write_text(p, "a")
        zio.atomic_write_text(p, "b")
        assert p.read_text() == "b" and [q.name for q in p.parent.iterdir()] == ["f.txt"]

    def test_floats_round_trip_exactly(self, tmp_path):
        x = [0.1 + 0.2, 1 / 3, 1e-300]
        p = zio.write_csv(tmp_path / "f.csv", ["a", "b", "c"], [x])
        assert [float(v) for v in zio.read_table(p)[1][0]] == x

    def test_manifest(self, tmp_path):
        import hashlib

        out = zio.write_csv(tmp_path / "o.csv", ["a"], [[1]])
        m = zio.write_manifest(tmp_path, "fit", {"n": np.int64(3), "path": tmp_path}, 7, outputs=[out], started=0.0)
        doc = json.loads(m.read_text())
        assert doc["command"] == "fit" and doc["seed"] == 7 and doc["config"]["n"] == 3
        assert doc["outputs"][str(out)] == hashlib.sha256(out.read_bytes()).hexdigest()


def test_dataset_subset_keeps_names(tmp_path):
    d = Dataset([0.0, 0.2, 0.3], np.ones((3, 1)), np.ones((3, 1)), g_names=("intercept",))
    assert d.subset([0, 2]).n == 2
