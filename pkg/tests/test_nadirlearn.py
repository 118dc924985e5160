import numpy as np
import pytest

from cfuc import cases, freq, nadirlearn
from cfuc.nadirlearn import LearnError, NadirModel, SamplePoint


@pytest.fixture(scope="module")
def small_case():
    return cases.desk_case()


def linear_points(rng, alpha, n=400, noise=0.0):
    out = []
    for _ in range(n):
        p, h, r = rng.uniform(1, 10), rng.uniform(50, 500), rng.uniform(2, 20)
        y = alpha[0] + alpha[1] * p + alpha[2] * h + alpha[3] * r + noise * rng.normal()
        out.append(SamplePoint(p, h, r, 30.0, y))
    return out


# ---------------------------------------------------------------------------
# dataset

def test_empty_request(small_case):
    assert nadirlearn.generate_dataset(small_case, 0) == []


def test_dataset_is_deterministic(small_case):
    a = nadirlearn.generate_dataset(small_case, 300, seed=5)
    b = nadirlearn.generate_dataset(small_case, 300, seed=5)
    c = nadirlearn.generate_dataset(small_case, 300, seed=6)
    assert a == b and a != c and len(a) == 300


def test_labels_are_exact_and_straddle_threshold(small_case):
    pts = nadirlearn.generate_dataset(small_case, 2000, seed=3)
    labels = np.array([s.label_nadir for s in pts])
    assert (labels <= 2.5).any() and (labels > 2.5).any()
    assert labels.max() <= nadirlearn.LABEL_CAP
    s = pts[17]
    ref = min(freq.nadir_exact(s.lost_power, s.reserve, s.inertia, s.demand, small_case.params), nadirlearn.LABEL_CAP)
    assert s.label_nadir == ref


def test_secure_only_respects_rocof_and_qss(small_case):
    prm = small_case.params
    for s in nadirlearn.generate_dataset(small_case, 1000, seed=2):
        assert s.lost_power <= 2 * prm.rocof_limit / prm.f0 * s.inertia + 1e-9
        assert s.reserve >= s.lost_power - prm.damping * s.demand * prm.qss_limit - 1e-9


def test_random_fill_respects_limits(rng):
    pmin, pmax = np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 9.0])
    for level in (6.0, 10.0, 18.0):
        p = nadirlearn._random_fill(rng, pmin, pmax, level)
        assert p.sum() == pytest.approx(level)
        assert np.all(p >= pmin) and np.all(p <= pmax + 1e-12)


def test_dataset_csv_round_trip(tmp_path, small_case):
    pts = nadirlearn.generate_dataset(small_case, 50, seed=1)
    path = tmp_path / "d.csv"
    nadirlearn.write_dataset(pts, path)
    back = nadirlearn.read_dataset(path)
    assert [(s.lost_power, s.inertia, s.reserve, s.demand, s.label_nadir) for s in back] == \
           [(s.lost_power, s.inertia, s.reserve, s.demand, s.label_nadir) for s in pts]
    assert path.read_text().splitlines()[0] == "lost_mw,inertia_mws,reserve_mw,demand_mw,nadir_hz"


# ---------------------------------------------------------------------------
# fitting and scoring

def test_exact_linear_recovery(rng):
    alpha = (1.5, 0.4, -0.003, -0.05)
    pts = linear_points(rng, alpha)
    model = nadirlearn.fit_linear(pts, 2.0)
    assert np.allclose(model.alpha, alpha, atol=1e-6)
    assert model.score == 1.0 and model.margin == 0.0


def test_constant_labels_give_flat_model(rng):
    pts = [SamplePoint(s.lost_power, s.inertia, s.reserve, s.demand, 2.0)
           for s in linear_points(rng, (0, 0, 0, 0), n=50)]
    a = nadirlearn.fit_alpha(pts)
    assert a[0] == pytest.approx(2.0) and np.allclose(a[1:], 0.0, atol=1e-10)


def test_rank_deficient_rejected():
    pts = [SamplePoint(1.0, 100.0, 5.0, 30.0, 1.0 + k) for k in range(10)]
    with pytest.raises(LearnError, match="rank-deficient"):
        nadirlearn.fit_alpha(pts)
    with pytest.raises(LearnError, match="at least 4"):
        nadirlearn.fit_alpha(pts[:3])


def test_empty_test_set():
    with pytest.raises(LearnError, match="empty"):
        nadirlearn.score(NadirModel((0, 0, 0, 0), 2.5, 0.0), [])


def test_score_is_per_point_agreement():
    m = NadirModel((0.0, 1.0, 0.0, 0.0), 2.5, 0.0)
    pts = [SamplePoint(1.0, 1, 1, 1, 1.0), SamplePoint(2.0, 1, 1, 1, 3.0),
           SamplePoint(3.0, 1, 1, 1, 3.0), SamplePoint(4.0, 1, 1, 1, 4.0)]
    assert nadirlearn.score(m, pts) == 0.75
    assert nadirlearn.score(m, pts, margin=1.0) == 1.0


def test_margin_removes_false_secure(rng):
    pts = linear_points(rng, (1.0, 0.3, -0.002, -0.05), n=600, noise=0.3)
    m = nadirlearn.fit_linear(pts, 2.0, seed=4)
    train, _ = nadirlearn.split(pts, 2.0, seed=4)
    X = np.array([[1, s.lost_power, s.inertia, s.reserve] for s in train])
    y = np.array([s.label_nadir for s in train])
    pred = X @ np.array(m.alpha)
    assert m.margin > 0
    assert not np.any((pred <= m.effective_limit(2.0)) & (y > 2.0))
    plain = nadirlearn.fit_linear(pts, 2.0, seed=4, conservative=False)
    assert plain.margin == 0.0 and plain.alpha == m.alpha


def test_split_is_stratified(rng):
    pts = linear_points(rng, (0.0, 0.5, 0.0, 0.0), n=500)
    train, test = nadirlearn.split(pts, 2.5, seed=1)
    assert len(train) + len(test) == 500
    frac = lambda xs: np.mean([s.label_nadir <= 2.5 for s in xs])  # noqa: E731
    assert abs(frac(train) - frac(test)) < 0.01


def test_refit_with_new_seed_is_stable(desk_dataset):
    a = nadirlearn.fit_linear(desk_dataset, 2.5, seed=1)
    b = nadirlearn.fit_linear(desk_dataset, 2.5, seed=2)
    assert abs(a.score - b.score) <= 0.02


def test_model_json_round_trip(tmp_path, rng):
    m = nadirlearn.fit_linear(linear_points(rng, (1.0, 0.3, -0.002, -0.05), noise=0.2), 2.0, seed=9)
    path = tmp_path / "nadir_model.json"
    m.save(path)
    back = NadirModel.load(path)
    assert back == m
    back.save(tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()
