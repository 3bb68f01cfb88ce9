import json

import pytest

from reviewloop.errors import (
    BusyError,
    ConfigError,
    ConflictError,
    EmptyPoolError,
    IngestError,
    NoRoundsYetError,
    NotFoundError,
    PoolExhaustedError,
    TaxonomyError,
)
from reviewloop.seqmodel import Hyperparams
from reviewloop.service import ServiceConfig, Store
from reviewloop.synth import SynthSpec, generate_synthetic_corpus

FAST_HYPER = Hyperparams(hidden_size=4, epochs=2, batch_size=16, seed=0)


def make_config(**overrides):
    base = dict(hyper=FAST_HYPER, embedding="self_trained", embedding_dim=4,
                seed=0)
    base.update(overrides)
    return ServiceConfig(**base)


def corpus_lines(n_pool=40, n_labeled=12, n_val=10, seed=0):
    """JSONL lines: a labeled seed set, unlabeled pool, labeled validation."""
    spec = SynthSpec(n_samples=n_pool, n_validation=n_val, n_aspect_classes=4,
                     tokens_per_cluster=6, seed=seed)
    rows, _ = generate_synthetic_corpus(spec)
    lines = []
    for i, row in enumerate(rows):
        d = row.to_dict()
        if row.split != "validation" and i >= n_labeled:
            d.pop("aspects", None)
            d.pop("sentiment", None)
        lines.append(json.dumps(d))
    return lines, spec.taxonomy()


@pytest.fixture
def store(tmp_path):
    lines, taxonomy = corpus_lines()
    s = Store.create(tmp_path / "store", make_config(), taxonomy=taxonomy)
    s.ingest_lines(lines)
    return s


class TestIngest:
    def test_partition_counts(self, tmp_path):
        lines, taxonomy = corpus_lines()
        s = Store.create(tmp_path / "s", make_config(), taxonomy=taxonomy)
        delta = s.ingest_lines(lines)
        assert delta == {"labeled": 12, "unlabeled": 28, "validation": 10}
        assert s.counts() == {"labeled": 12, "unlabeled": 28, "pending": 0,
                              "validation": 10}

    def test_duplicate_id_rejected_with_line(self, store):
        line = json.dumps({"id": "doc00000", "text": "again"})
        with pytest.raises(IngestError) as exc:
            store.ingest_lines([line])
        assert exc.value.line_no == 1

    def test_unknown_label_rejected(self, store):
        line = json.dumps({"id": "x1", "text": "t", "aspects": ["Pricing"]})
        with pytest.raises(TaxonomyError):
            store.ingest_lines([line])

    def test_malformed_json_line_number(self, store):
        with pytest.raises(IngestError) as exc:
            store.ingest_lines([json.dumps({"id": "ok1", "text": "t"}), "{oops"])
        assert exc.value.line_no == 2

    def test_labeled_row_with_table_one_names(self, tmp_path):
        s = Store.create(tmp_path / "s", make_config())
        line = json.dumps({"id": "r1", "text": "renewal and contract terms",
                           "aspects": ["Loyalty", "Contract"],
                           "sentiment": ["Negative"]})
        s.ingest_lines([line])
        aspect, _ = s._labeled["r1"]
        assert aspect.names() == ["Loyalty", "Contract"]


class TestQueue:
    def test_fallback_random_is_flagged_and_idempotent(self, store):
        a = store.queue_next(5)
        b = store.queue_next(5)
        assert a["selection"] == "random_fallback"
        assert [t.doc_id for t in a["tasks"]] == [t.doc_id for t in b["tasks"]]
        assert all(t.predictions is None for t in a["tasks"])

    def test_clamps_to_remaining(self, store):
        out = store.queue_next(999)
        assert len(out["tasks"]) == 28

    def test_exhausted_pool(self, tmp_path):
        s = Store.create(tmp_path / "s", make_config())
        s.ingest_lines([json.dumps({"id": "a", "text": "t",
                                    "aspects": [], "sentiment": []})])
        with pytest.raises(PoolExhaustedError):
            s.queue_next(1)

    def test_uncertainty_order_after_training(self, store):
        store.trigger_retrain(blocking=True)
        assert store.train_status()["status"] == "done"
        out = store.queue_next(10)
        assert out["selection"] == "uncertainty"
        scores = [t.uncertainty for t in out["tasks"]]
        assert scores == sorted(scores, reverse=True)
        assert all(t.predictions is not None for t in out["tasks"])
        again = store.queue_next(10)
        assert [t.doc_id for t in out["tasks"]] == [t.doc_id for t in again["tasks"]]


class TestLeases:
    def test_other_annotators_excluded_until_expiry(self, tmp_path):
        lines, taxonomy = corpus_lines()
        fake_time = [1000.0]
        s = Store.create(tmp_path / "s", make_config(lease_seconds=60.0),
                         taxonomy=taxonomy, clock=lambda: fake_time[0])
        s.ingest_lines(lines)
        mine = s.queue_next(5, annotator="alice")
        theirs = s.queue_next(5, annotator="bob")
        my_ids = {t.doc_id for t in mine["tasks"]}
        their_ids = {t.doc_id for t in theirs["tasks"]}
        assert not my_ids & their_ids

        # Same annotator sees their own leased tasks again.
        mine_again = s.queue_next(5, annotator="alice")
        assert {t.doc_id for t in mine_again["tasks"]} == my_ids

        fake_time[0] += 61.0
        freed = s.queue_next(5, annotator="carol")
        assert {t.doc_id for t in freed["tasks"]} & (my_ids | their_ids)


class TestSubmit:
    def test_accepted_submission_moves_to_labeled(self, store):
        doc_id = store.queue_next(1)["tasks"][0].doc_id
        before = store.counts()["labeled"]
        ack = store.submit_labels(doc_id, ["Loyalty"], ["Positive"], "alice")
        assert ack["labeled"] == before + 1
        assert store.counts()["labeled"] == before + 1

    def test_double_submission_conflicts(self, store):
        doc_id = store.queue_next(1)["tasks"][0].doc_id
        store.submit_labels(doc_id, [], ["Positive"], "alice")
        with pytest.raises(ConflictError):
            store.submit_labels(doc_id, [], ["Negative"], "bob")

    def test_unknown_id(self, store):
        with pytest.raises(NotFoundError):
            store.submit_labels("ghost", [], [], "alice")

    def test_bad_label_name(self, store):
        doc_id = store.queue_next(1)["tasks"][0].doc_id
        with pytest.raises(TaxonomyError):
            store.submit_labels(doc_id, ["Pricing"], [], "alice")

    def test_empty_aspects_with_sentiment_is_legal(self, store):
        doc_id = store.queue_next(1)["tasks"][0].doc_id
        ack = store.submit_labels(doc_id, [], ["Negative"], "alice")
        assert ack["doc_id"] == doc_id

    def test_validation_doc_rejected_as_conflict(self, store):
        with pytest.raises(ConflictError):
            store.submit_labels("val00000", [], ["Positive"], "alice")


class TestRetrain:
    def test_round_recorded_with_metrics(self, store):
        store.trigger_retrain(blocking=True)
        metrics = store.get_metrics()
        assert metrics["rounds"] == 1
        assert metrics["counts"]["labeled"] == 12
        assert 0.0 <= metrics["aspect"]["micro_f1"] <= 1.0
        assert 0.0 <= metrics["sentiment"]["micro_f1"] <= 1.0

    def test_empty_labeled_pool_rejected(self, tmp_path):
        s = Store.create(tmp_path / "s", make_config())
        s.ingest_lines([json.dumps({"id": "a", "text": "something"})])
        with pytest.raises(EmptyPoolError):
            s.trigger_retrain()

    def test_busy_while_running(self, tmp_path):
        lines, taxonomy = corpus_lines(n_pool=60, n_labeled=40)
        slow = make_config(hyper=Hyperparams(hidden_size=16, epochs=40,
                                             batch_size=8, seed=0))
        s = Store.create(tmp_path / "s", slow, taxonomy=taxonomy)
        s.ingest_lines(lines)
        s.trigger_retrain()
        with pytest.raises(BusyError):
            s.trigger_retrain()
        assert s.wait_for_training(timeout=120)["status"] == "done"

    def test_unchanged_pool_same_seed_identical_metrics(self, store):
        store.trigger_retrain(blocking=True)
        first = store.get_metrics()
        store.trigger_retrain(blocking=True)
        second = store.get_metrics()
        assert second["rounds"] == 2
        assert first["aspect"] == second["aspect"]
        assert first["sentiment"] == second["sentiment"]

    def test_labels_then_retrain_extends_curve(self, store):
        store.trigger_retrain(blocking=True)
        for task in store.queue_next(5)["tasks"]:
            store.submit_labels(task.doc_id, ["Loyalty"], ["Positive"], "a")
        store.trigger_retrain(blocking=True)
        curve = store.get_curve()
        for task_points in curve.points.values():
            assert [p[0] for p in task_points] == [12, 17]

    def test_auto_retrain_after_k_submissions(self, tmp_path):
        lines, taxonomy = corpus_lines()
        s = Store.create(tmp_path / "s", make_config(auto_retrain_every=2),
                         taxonomy=taxonomy)
        s.ingest_lines(lines)
        ids = [t.doc_id for t in s.queue_next(2)["tasks"]]
        s.submit_labels(ids[0], [], ["Positive"], "a")
        assert s.train_status()["status"] == "idle"
        s.submit_labels(ids[1], [], ["Negative"], "a")
        assert s.wait_for_training(timeout=60)["status"] == "done"
        assert s.get_metrics()["rounds"] == 1


class TestReporting:
    def test_no_rounds_yet(self, store):
        with pytest.raises(NoRoundsYetError):
            store.get_metrics()
        with pytest.raises(NoRoundsYetError):
            store.get_curve()


class TestConcurrentReads:
    def test_queue_consistent_while_retraining(self, store):
        """Readers racing a checkpoint swap must each see one coherent
        snapshot: scores within a response are non-increasing."""
        import threading

        store.trigger_retrain(blocking=True)
        errors = []

        def reader():
            try:
                for _ in range(30):
                    out = store.queue_next(8)
                    scores = [t.uncertainty for t in out["tasks"]
                              if t.uncertainty is not None]
                    assert scores == sorted(scores, reverse=True)
            except Exception as exc:  # surfaced after join
                errors.append(exc)

        threads = [threading.Thread(target=reader) for _ in range(4)]
        for t in threads:
            t.start()
        store.trigger_retrain(blocking=True)
        for t in threads:
            t.join()
        assert errors == []


class TestPersistence:
    def test_crash_safety_queue_order_preserved(self, tmp_path):
        lines, taxonomy = corpus_lines()
        root = tmp_path / "s"
        s = Store.create(root, make_config(), taxonomy=taxonomy)
        s.ingest_lines(lines)
        s.trigger_retrain(blocking=True)
        for task in s.queue_next(3)["tasks"]:
            s.submit_labels(task.doc_id, ["Loyalty"], ["Positive"], "a")
        before_queue = [t.doc_id for t in s.queue_next(10)["tasks"]]
        before_metrics = s.get_metrics()
        before_curve = s.get_curve()

        # Simulate a kill: reopen from disk only.
        reopened = Store.open(root)
        after_queue = [t.doc_id for t in reopened.queue_next(10)["tasks"]]
        assert after_queue == before_queue
        assert reopened.get_metrics() == before_metrics
        assert reopened.get_curve() == before_curve

    def test_audit_replay_reproduces_labeled_set(self, tmp_path):
        lines, taxonomy = corpus_lines()
        root = tmp_path / "s"
        s = Store.create(root, make_config(), taxonomy=taxonomy)
        s.ingest_lines(lines)
        submitted = {}
        for task in s.queue_next(4)["tasks"]:
            s.submit_labels(task.doc_id, ["Contract"], ["Negative"], "a")
            submitted[task.doc_id] = (["Contract"], ["Negative"])
        reopened = Store.open(root)
        assert set(reopened._labeled) == set(s._labeled)
        for doc_id, (aspects, sentiment) in submitted.items():
            aspect_lv, sent_lv = reopened._labeled[doc_id]
            assert aspect_lv.names() == aspects
            assert sent_lv.names() == sentiment

    def test_leases_survive_reopen(self, tmp_path):
        lines, taxonomy = corpus_lines()
        fake_time = [1000.0]
        root = tmp_path / "s"
        s = Store.create(root, make_config(lease_seconds=600.0),
                         taxonomy=taxonomy, clock=lambda: fake_time[0])
        s.ingest_lines(lines)
        mine = {t.doc_id for t in s.queue_next(5, annotator="alice")["tasks"]}
        reopened = Store.open(root, clock=lambda: fake_time[0])
        others = {t.doc_id for t in reopened.queue_next(28, annotator="bob")["tasks"]}
        assert not mine & others

    def test_create_over_existing_store_rejected(self, tmp_path):
        root = tmp_path / "s"
        Store.create(root, make_config())
        with pytest.raises(ConfigError):
            Store.create(root, make_config())
