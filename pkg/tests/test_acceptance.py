"""Acceptance criteria 1 to 12, one test each.

Every test prints ``PASS criterion N: ...`` or ``FAIL criterion N: ...``;
the lines are repeated in the terminal summary.
"""

import contextlib
import math
import time

import numpy as np
import pytest

from hivecote.boss import (
    BossParams,
    CBossConfig,
    ContractableBOSS,
    boss_distance,
    retain_best,
    truncated_dft,
)
from hivecote.datasets import (
    interval_mean_problem,
    pattern_frequency_problem,
    planted_shapelet_problem,
    two_frequency_problem,
)
from hivecote.experiments import ClassifierResult, read_result, result_path, write_component_results, write_result
from hivecote.hive_cote import (
    HiveCoteConfig,
    build_from_results_files,
    build_hive_cote,
    checkpoint_load,
    checkpoint_save,
    combine_matrix,
    combine_scores,
)
from hivecote.rise import RandomIntervalSpectralEnsemble, RiseConfig, spectral_features
from hivecote.stc import (
    ShapeletTransformClassifier,
    StcConfig,
    build_stc,
    exhaustive_shapelet_search,
    information_gain,
    shapelet_distance,
)
from hivecote.tsf import TimeSeriesForest, TsfConfig

from conftest import ACCEPTANCE_LINES, make_set


@contextlib.contextmanager
def criterion(number, title):
    """Record PASS when the block finishes, FAIL with the reason otherwise."""
    notes = []
    started = time.perf_counter()
    try:
        yield notes
    except BaseException as exc:
        line = f"FAIL criterion {number}: {title} ({type(exc).__name__}: {str(exc).splitlines()[0][:160]})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        raise
    extra = "; ".join(notes)
    line = f"PASS criterion {number}: {title} [{time.perf_counter() - started:.1f}s{'; ' + extra if extra else ''}]"
    print(line)
    ACCEPTANCE_LINES.append(line)


# ---------------------------------------------------------------- oracles


def naive_dft(x):
    """Complex DFT by the O(r^2) sum; ``k * t`` is reduced mod r before the trig."""
    r = x.shape[0]
    kt = np.outer(np.arange(r), np.arange(r)) % r
    angle = 2 * np.pi * kt / r
    return (np.cos(angle) * x).sum(axis=1) - 1j * (np.sin(angle) * x).sum(axis=1)


def znorm(x):
    sd = x.std()
    return np.zeros_like(x) if sd <= 1e-8 else (x - x.mean()) / sd


def distance_oracle(s, x):
    L = s.shape[0]
    best = math.inf
    for a in range(x.shape[0] - L + 1):
        w = znorm(x[a:a + L])
        total = 0.0
        for k in range(L):
            total += (w[k] - s[k]) ** 2
        best = min(best, total)
    return best / L


def entropy(p, n):
    if n == 0 or p == 0 or p == n:
        return 0.0
    q = p / n
    return -(q * math.log2(q) + (1 - q) * math.log2(1 - q))


def gain_oracle(d, pos):
    """Best gain over every midpoint between distinct sorted distances, lowest threshold on ties."""
    n, P = len(d), sum(pos)
    values = sorted(set(d))
    best, best_t = 0.0, values[0]
    first = True
    for a, b in zip(values, values[1:]):
        t = (a + b) / 2
        left = [p for x, p in zip(d, pos) if x <= t]
        right = [p for x, p in zip(d, pos) if x > t]
        g = entropy(P, n) - (len(left) * entropy(sum(left), len(left))
                             + len(right) * entropy(sum(right), len(right))) / n
        if first or g > best + 1e-12:
            best, best_t, first = g, t, False
    return best, best_t


# ---------------------------------------------------------------- 1 to 5


def test_criterion_01_dft_oracle():
    with criterion(1, "DFT and RISE spectrum match a naive DFT to 1e-9, 1000 windows") as notes:
        rng = np.random.default_rng(1)
        started = time.perf_counter()
        worst = 0.0
        for _ in range(1000):
            r = int(rng.integers(4, 257))
            x = rng.normal(size=r)
            full = naive_dft(x)
            power = np.abs(full[1:r // 2 + 1]) ** 2
            got = spectral_features(x, max_acf_lags=1)[:r // 2]
            worst = max(worst, np.max(np.abs(got - power)))
            half = r // 2
            coeffs = np.column_stack([full.real, full.imag]).ravel()
            raw = truncated_dft(x, 2 * half, False)
            worst = max(worst, np.max(np.abs(raw - coeffs[:2 * half])))
            norm = truncated_dft(x, 2 * half, True)
            worst = max(worst, np.max(np.abs(norm - coeffs[2:2 * half + 2])))
        elapsed = time.perf_counter() - started
        notes.append(f"max abs error {worst:.2e}")
        assert worst <= 1e-9
        assert elapsed < 10


def test_criterion_02_information_gain_oracle():
    with criterion(2, "information gain matches exhaustive thresholds, 10000 instances, n <= 12") as notes:
        rng = np.random.default_rng(2)
        started = time.perf_counter()
        checked = 0
        while checked < 10_000:
            n = int(rng.integers(2, 13))
            pos = rng.random(n) < rng.uniform(0.1, 0.9)
            if pos.all() or not pos.any():
                continue
            # a coarse grid makes ties common
            d = rng.integers(0, int(rng.integers(1, 8)) + 1, n) / 4.0
            g, t = information_gain(d, pos, True)
            og, ot = gain_oracle(d.tolist(), pos.tolist())
            assert abs(g - og) <= 1e-12, (d, pos, g, og)
            if len(set(d.tolist())) > 1:
                assert t == ot, (d, pos, t, ot)
            checked += 1
        elapsed = time.perf_counter() - started
        notes.append(f"{checked} instances")
        assert elapsed < 30


def test_criterion_03_shapelet_distance_oracle():
    with criterion(3, "shapelet distance matches the double-loop oracle to 1e-9, 1000 pairs") as notes:
        rng = np.random.default_rng(3)
        started = time.perf_counter()
        worst = 0.0
        for i in range(1000):
            m = int(rng.integers(3, 65))
            L = int(rng.integers(1, m + 1))
            x = rng.normal(size=m)
            if i % 10 == 0:
                x[: m // 2] = 2.0  # flat stretches give degenerate windows
            s = znorm(rng.normal(size=L))
            worst = max(worst, abs(shapelet_distance(s, x) - distance_oracle(s, x)))
        elapsed = time.perf_counter() - started
        notes.append(f"max abs error {worst:.2e}")
        assert worst <= 1e-9
        assert elapsed < 10


def test_criterion_04_boss_distance():
    with criterion(4, "BOSS distance: d(X,X)=0, query-support Euclidean, witness pair (2, 10)") as notes:
        rng = np.random.default_rng(4)
        for _ in range(2000):
            q = {int(k): int(rng.integers(1, 6)) for k in rng.integers(0, 15, rng.integers(0, 8))}
            r = {int(k): int(rng.integers(1, 6)) for k in rng.integers(0, 15, rng.integers(0, 8))}
            assert boss_distance(q, q) == 0
            assert boss_distance(q, r) == sum((q[u] - r.get(u, 0)) ** 2 for u in q)
        a = {("a", "b"): 2, ("b", "a"): 1}
        b = {("a", "b"): 1, ("c", "c"): 3}
        pair = (boss_distance(a, b), boss_distance(b, a))
        notes.append(f"witness {pair}")
        assert pair == (2, 10)


def test_criterion_05_cawpe_combiner():
    with criterion(5, "CAWPE hand oracle, weight-scaling invariance, alpha=0 mean") as notes:
        scores = combine_scores(np.array([[[0.7, 0.3]], [[0.2, 0.8]]]), [0.9, 0.6], 4)[0]
        hand = [0.9 ** 4 * 0.7 + 0.6 ** 4 * 0.2, 0.9 ** 4 * 0.3 + 0.6 ** 4 * 0.8]
        assert np.max(np.abs(scores - hand)) <= 1e-12
        # 0.9**4 * 0.3 + 0.6**4 * 0.8 = 0.19683 + 0.10368
        assert abs(scores[0] - 0.48519) <= 1e-5 and abs(scores[1] - 0.30051) <= 1e-5
        notes.append(f"scores [{scores[0]:.5f}, {scores[1]:.5f}]")
        rng = np.random.default_rng(5)
        for _ in range(10_000):
            k, c = int(rng.integers(1, 6)), int(rng.integers(2, 6))
            probs = rng.dirichlet(np.ones(c), size=(k, 1))
            w = rng.uniform(0.01, 1.0, k)
            alpha = float(rng.uniform(0, 8))
            base = combine_matrix(probs, w, alpha)
            scaled = combine_matrix(probs, w * rng.uniform(0.01, 100), alpha)
            assert np.argmax(base) == np.argmax(scaled)
            assert np.max(np.abs(combine_matrix(probs, w, 0.0) - probs.mean(axis=0))) <= 1e-12


# ---------------------------------------------------------------- 6, 7, 9


SUITE = {
    "IntervalMean": (interval_mean_problem, "TSF", 0.95),
    "TwoFrequency": (two_frequency_problem, "RISE", 0.90),
    "PatternFrequency": (pattern_frequency_problem, "cBOSS", 0.90),
    "PlantedShapelet": (planted_shapelet_problem, "STC", 0.90),
}
HC_CONTRACT = 60.0


@pytest.fixture(scope="module")
def suite_runs():
    """Sequential HIVE-COTE under a 60 s contract on each synthetic problem."""
    runs = {}
    for name, (generator, _, _) in SUITE.items():
        train, test = generator()
        started = time.perf_counter()
        hc = build_hive_cote(train, HiveCoteConfig(seed=0, contract_seconds=HC_CONTRACT))
        runs[name] = (train, test, hc, time.perf_counter() - started)
    return runs


@pytest.mark.slow
def test_criterion_06_component_affinity(suite_runs):
    with criterion(6, "synthetic affinity suite: matched component thresholds, HC >= matched - 0.03") as notes:
        failures = []
        for name, (_, test, hc, _) in suite_runs.items():
            _, matched, threshold = SUITE[name]
            comp = next(c for c in hc.components_ if c.name == matched)
            acc = float(np.mean(comp.model.predict(test.series) == test.labels))
            hc_acc = float(np.mean(hc.predict(test.series) == test.labels))
            notes.append(f"{name}: {matched} {acc:.3f}, HC {hc_acc:.3f}")
            if acc < threshold:
                failures.append(f"{matched} {acc:.3f} < {threshold} on {name}")
            if hc_acc < acc - 0.03:
                failures.append(f"HC {hc_acc:.3f} < {matched} {acc:.3f} - 0.03 on {name}")
        total = sum(run[3] for run in suite_runs.values())
        notes.append(f"HC builds {total:.0f}s")
        assert not failures, failures
        assert total < 600


def _contracted(name, seconds):
    if name == "TSF":
        return TimeSeriesForest(TsfConfig(tree_count=100_000, seed=0, contract_seconds=seconds))
    if name == "RISE":
        return RandomIntervalSpectralEnsemble(RiseConfig(tree_count=100_000, seed=0, contract_seconds=seconds))
    if name == "cBOSS":
        cfg = CBossConfig(max_ensemble_size=50, parameter_samples=100_000, seed=0, contract_seconds=seconds)
        return ContractableBOSS(cfg)
    return ShapeletTransformClassifier(StcConfig(seed=0, contract_seconds=seconds))


@pytest.mark.slow
def test_criterion_07_contract_compliance(suite_runs):
    with criterion(7, "10 s component contracts within 12.5 s; HC T=60 s within 75 s, 15 s slices") as notes:
        failures = []
        for dataset, (_, matched, _) in SUITE.items():
            train, _, _, _ = suite_runs[dataset]
            model = _contracted(matched, 10.0)
            started = time.perf_counter()
            model.fit(train)
            wall = time.perf_counter() - started
            if matched == "STC":
                notes.append(f"STC search {model.search_seconds_:.1f}s (build {wall:.1f}s)")
                if model.search_seconds_ > 12.5:
                    failures.append(f"STC search {model.search_seconds_:.1f}s")
            else:
                notes.append(f"{matched} {wall:.1f}s/{model.units_built_} units")
                if wall > 12.5:
                    failures.append(f"{matched} {wall:.1f}s")
                if not model.stopped_by_contract_:
                    failures.append(f"{matched} finished before the contract bound it")
        for dataset, (_, _, hc, wall) in suite_runs.items():
            slices = set(hc.allocation_.values())
            if slices != {HC_CONTRACT / 4}:
                failures.append(f"slices {slices}")
            over = [c.name for c in hc.components_ if c.build_seconds > 1.25 * HC_CONTRACT / 4]
            if wall > 75 or over:
                failures.append(f"HC on {dataset}: {wall:.1f}s, over-slice {over}")
            notes.append(f"HC {dataset} {wall:.1f}s")
        assert not failures, failures


@pytest.mark.slow
def test_criterion_09_from_file_equivalence(suite_runs, tmp_path):
    with criterion(9, "from-file HIVE-COTE equals in-memory predictions on all four problems") as notes:
        worst = 0.0
        for dataset, (_, test, hc, _) in suite_runs.items():
            write_component_results(hc, test, tmp_path, dataset, 0)
            fe = build_from_results_files(tmp_path, dataset, 0, hc.component_names, hc.config.alpha)
            live = hc.predict_proba(test.series)
            np.testing.assert_array_equal(fe.predictions, np.argmax(live, axis=1))
            np.testing.assert_array_equal(fe.weights, hc.weights_)
            worst = max(worst, float(np.max(np.abs(fe.test_proba - live))))
        notes.append(f"labels identical, max probability gap {worst:.1e} from 6-digit printing")
        assert worst <= 1e-5


# ---------------------------------------------------------------- 8, 10, 11, 12


def _printed(p):
    return np.vectorize(lambda v: float(format(v, ".6g")))(p)


def test_criterion_08_checkpoint_determinism(tmp_path):
    with criterion(8, "interrupted, checkpointed and resumed builds equal uninterrupted ones") as notes:
        train, test = planted_shapelet_problem(n_train=60, n_test=40, seed=8)
        builders = {
            "TSF": (lambda: TimeSeriesForest(TsfConfig(tree_count=60, seed=1)), 30),
            "RISE": (lambda: RandomIntervalSpectralEnsemble(RiseConfig(tree_count=40, seed=2)), 20),
            "cBOSS": (lambda: ContractableBOSS(CBossConfig(max_ensemble_size=5, parameter_samples=20, seed=3)), 10),
            "STC": (lambda: ShapeletTransformClassifier(
                StcConfig(budget_schedule=(100, 100, 100, 100), tree_count=30, seed=4)), 2),
        }
        for name, (make, stop) in builders.items():
            full = make().fit(train)
            part = make().fit(train, max_units=stop)
            assert not part.complete_
            path = tmp_path / f"{name}.ckpt"
            checkpoint_save(part, path)
            resumed = checkpoint_load(path).resume()
            np.testing.assert_array_equal(_printed(resumed.predict_proba(test)), _printed(full.predict_proba(test)))
            notes.append(f"{name} at {stop}")


def test_criterion_10_cboss_retention():
    with criterion(10, "cBOSS retention replays keep the top-k multiset and never exceed k") as notes:
        kept = retain_best([0.5, 0.6, 0.7, 0.4], 2)
        assert sorted([0.5, 0.6, 0.7, 0.4][i] for i in kept) == [0.6, 0.7]
        rng = np.random.default_rng(10)
        scripted = [[0.3] * 6, [0.9, 0.1, 0.9, 0.1], list(np.linspace(1, 0, 12)), list(np.linspace(0, 1, 12))]
        scripted += [list(rng.choice([0.2, 0.4, 0.6, 0.8], size=int(rng.integers(1, 40)))) for _ in range(2000)]
        for accs in scripted:
            for k in (1, 2, 3, 5, 8):
                sizes = []
                kept = retain_best(accs, k, on_step=sizes.append)
                assert max(sizes) <= k
                assert sorted(accs[i] for i in kept) == sorted(sorted(accs)[-k:])
        notes.append(f"{len(scripted) * 5} replays")


def test_criterion_11_full_enumeration():
    with criterion(11, "oversized STC budget reproduces the exhaustive pool on n=10, m=20") as notes:
        data = make_set(n=10, m=20, seed=11)
        model = build_stc(data, StcConfig(budget_schedule=(10 ** 7,), tree_count=5, seed=0))
        expected = exhaustive_shapelet_search(data, k=1000)
        assert model.enumerated_all_
        assert [s.key() for s in model.shapelets_] == [s.key() for s in expected]
        for a, b in zip(model.shapelets_, expected):
            np.testing.assert_array_equal(a.values, b.values)
        notes.append(f"{len(expected)} shapelets")


def test_criterion_12_results_round_trip(tmp_path):
    with criterion(12, "1000 random results files round-trip and feed the from-file builder") as notes:
        rng = np.random.default_rng(12)
        for i in range(1000):
            n, c = int(rng.integers(1, 30)), int(rng.integers(2, 8))
            probs = rng.dirichlet(np.full(c, rng.choice([0.05, 1.0, 20.0])), size=n)
            y = rng.integers(0, c, n)
            split = "train" if i % 2 else "test"
            r = ClassifierResult.from_probabilities(f"D{i}", "X", split, f"run {i}", y, probs,
                                                    int(rng.integers(0, 10 ** 15)), int(rng.integers(0, 10 ** 15)))
            path = write_result(r, result_path(tmp_path, "X", f"D{i}", split, 0))
            back = read_result(path)
            assert (back.dataset, back.classifier, back.split, back.parameters) == (f"D{i}", "X", split, f"run {i}")
            assert back.accuracy == r.accuracy
            assert (back.build_time_ns, back.test_time_ns) == (r.build_time_ns, r.test_time_ns)
            np.testing.assert_array_equal(back.true_labels, y)
            np.testing.assert_array_equal(back.predicted_labels, r.predicted_labels)
            np.testing.assert_array_equal(back.probabilities, _printed(probs))
            other = "test" if split == "train" else "train"
            write_result(ClassifierResult.from_probabilities(f"D{i}", "X", other, "", y, probs),
                         result_path(tmp_path, "X", f"D{i}", other, 0))
            fe = build_from_results_files(tmp_path, f"D{i}", 0, ["X"])
            truth_file = back if split == "test" else read_result(result_path(tmp_path, "X", f"D{i}", "test", 0))
            np.testing.assert_array_equal(fe.predictions, np.argmax(truth_file.probabilities, axis=1))
        notes.append("1000 files")
