import pytest

from rulefuse.data import (
    Dataset,
    FewShotConfig,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    load_labels,
    sample_fewshot,
    synthetic_rule_lines,
    write_dataset,
)
from rulefuse.errors import EmptyDatasetError, MalformedLineError
from rulefuse.experiment import compile_rules, rule_baseline_accuracy
from rulefuse.matching import Sentence
from rulefuse.rules import parse_rule_lines


def test_load_dataset_basic(tmp_path):
    path = tmp_path / "train.tsv"
    path.write_text("flight\tShow me Flights\nairline\twhich AIRLINE\nflight\tbook it\n")
    ds = load_dataset(path)
    assert len(ds) == 3
    assert ds.label_names == ["flight", "airline"]  # first-appearance order
    assert ds.samples[0][0].words == ("show", "me", "flights")
    assert [label for _, label in ds.samples] == [0, 1, 0]
    assert ds.class_counts() == [2, 1]


def test_load_dataset_fixed_labels(tmp_path):
    path = tmp_path / "train.tsv"
    path.write_text("b\tx y\na\tz\n")
    ds = load_dataset(path, label_names=["a", "b"])
    assert [label for _, label in ds.samples] == [1, 0]
    with pytest.raises(MalformedLineError):
        load_dataset(path, label_names=["a"])


def test_load_dataset_malformed(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("flight show me\n")
    with pytest.raises(MalformedLineError) as exc_info:
        load_dataset(path)
    assert exc_info.value.line == 1


def test_load_dataset_empty(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("\n\n")
    with pytest.raises(EmptyDatasetError):
        load_dataset(path)


def test_dataset_roundtrip(tmp_path):
    path = tmp_path / "ds.tsv"
    ds = Dataset(
        [(Sentence.from_text("a b"), 0), (Sentence.from_text("c"), 1)], ["x", "y"]
    )
    write_dataset(ds, path)
    again = load_dataset(path, label_names=["x", "y"])
    assert [(s.words, l) for s, l in again.samples] == [
        (("a", "b"), 0),
        (("c",), 1),
    ]


def test_load_labels(tmp_path):
    path = tmp_path / "labels.txt"
    path.write_text("Flight\nairline\n\n")
    assert load_labels(path) == ["flight", "airline"]
    dup = tmp_path / "dup.txt"
    dup.write_text("a\na\n")
    with pytest.raises(ValueError):
        load_labels(dup)


def _balanced_dataset(classes=18, per_class=9):
    samples = []
    names = [f"c{i}" for i in range(classes)]
    for c in range(classes):
        for j in range(per_class):
            samples.append((Sentence.from_text(f"word{c} filler{j}"), c))
    return Dataset(samples, names)


def test_fewshot_counts():
    ds = _balanced_dataset(classes=18, per_class=9)
    subsets = sample_fewshot(ds, FewShotConfig(q=5, seeds=(0,)))
    assert len(subsets) == 1
    assert len(subsets[0]) == 18 * 5


def test_fewshot_q1_and_small_classes():
    ds = _balanced_dataset(classes=4, per_class=2)
    subset = sample_fewshot(ds, FewShotConfig(q=1, seeds=(3,)))[0]
    assert len(subset) == 4
    capped = sample_fewshot(ds, FewShotConfig(q=10, seeds=(3,)))[0]
    assert len(capped) == 8  # min(q, class size) per class


def test_fewshot_subset_no_duplicates_deterministic():
    ds = _balanced_dataset(classes=6, per_class=7)
    config = FewShotConfig(q=3, seeds=(5, 9))
    first = sample_fewshot(ds, config)
    second = sample_fewshot(ds, config)
    originals = {(s.words, l) for s, l in ds.samples}
    for subset_a, subset_b in zip(first, second):
        keys = [(s.words, l) for s, l in subset_a.samples]
        assert len(keys) == len(set(keys))  # no duplicates
        assert set(keys) <= originals  # subset of the training set
        assert keys == [(s.words, l) for s, l in subset_b.samples]  # per-seed determinism
    assert [(s.words, l) for s, l in first[0].samples] != [
        (s.words, l) for s, l in first[1].samples
    ]


def test_fewshot_per_class_counts():
    ds = _balanced_dataset(classes=5, per_class=6)
    subset = sample_fewshot(ds, FewShotConfig(q=4, seeds=(1,)))[0]
    counts = subset.class_counts()
    assert counts == [4] * 5


def test_fewshot_augment_top3():
    samples = []
    names = ["big0", "big1", "big2", "small"]
    for c, size in enumerate((20, 15, 12, 4)):
        for j in range(size):
            samples.append((Sentence.from_text(f"t{c} s{j}"), c))
    ds = Dataset(samples, names)
    subset = sample_fewshot(ds, FewShotConfig(q=2, seeds=(0,), augment_top3=5))[0]
    counts = subset.class_counts()
    assert counts[:3] == [7, 7, 7]  # q + augment for the 3 largest classes
    assert counts[3] == 2
    keys = [(s.words, l) for s, l in subset.samples]
    assert len(keys) == len(set(keys))


def test_fewshot_validation():
    with pytest.raises(ValueError):
        FewShotConfig(q=0, seeds=(1,))
    with pytest.raises(ValueError):
        FewShotConfig(q=1, seeds=())


def test_synthetic_shapes_and_balance():
    spec = SyntheticSpec(classes=6, train_size=120, test_size=60, noise=0.0, seed=4)
    train, test, rule_lines = generate_synthetic(spec)
    assert len(train) == 120 and len(test) == 60
    assert train.C == 6 and train.label_names == test.label_names
    assert len(rule_lines) == 6
    assert train.class_counts() == [20] * 6


def test_synthetic_noise_free_corpus_is_rule_determined():
    spec = SyntheticSpec(classes=6, train_size=90, test_size=30, noise=0.0, seed=11)
    train, test, rule_lines = generate_synthetic(spec)
    ruleset = parse_rule_lines(rule_lines, known_labels=set(train.label_names))
    mdfas = compile_rules(ruleset)
    assert rule_baseline_accuracy(ruleset, mdfas, train) == 1.0
    assert rule_baseline_accuracy(ruleset, mdfas, test) == 1.0


def test_synthetic_noise_rate():
    spec = SyntheticSpec(classes=6, train_size=600, test_size=60, noise=0.1, seed=2)
    train, _, rule_lines = generate_synthetic(spec)
    ruleset = parse_rule_lines(rule_lines, known_labels=set(train.label_names))
    mdfas = compile_rules(ruleset)
    acc = rule_baseline_accuracy(ruleset, mdfas, train)
    assert 0.85 <= acc <= 0.95  # ~10% of labels flipped


def test_synthetic_determinism():
    spec = SyntheticSpec(seed=8, train_size=50, test_size=20)
    first = generate_synthetic(spec)
    second = generate_synthetic(spec)
    assert [(s.words, l) for s, l in first[0].samples] == [
        (s.words, l) for s, l in second[0].samples
    ]
    assert first[2] == second[2]


def test_synthetic_rule_lines_format():
    lines = synthetic_rule_lines(6)
    assert all("\t" in line for line in lines)
    labels = [line.split("\t")[0] for line in lines]
    assert len(set(labels)) == 6
