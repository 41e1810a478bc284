import json
from pathlib import Path

import pytest

from otdocs import RunConfig, explain_pair, run_classification, run_rank_summary, run_retrieval, run_sweep
from otdocs.errors import InputError
from synth import classification_fixture, retrieval_fixture, write_lines


@pytest.fixture(scope="module")
def small_retrieval(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("retrieval")
    return retrieval_fixture(tmp, n_sentences=12)


@pytest.fixture(scope="module")
def small_classification(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("classification")
    return classification_fixture(tmp, n_train_per=10, n_test_per=6)


class TestRunRetrieval:
    @pytest.mark.parametrize("method", ["nbow", "emd", "semd"])
    def test_self_retrieval_is_perfect(self, small_retrieval, method):
        source, target, emb = small_retrieval
        config = RunConfig(method=method, source=str(source), target=str(target),
                           src_emb=str(emb))
        report = run_retrieval(config)
        assert report["metrics"]["p_at_1"] == 1.0
        assert report["errors"]["query_errors"] == 0

    def test_translated_collection_still_perfect(self, tmp_path):
        source, target, emb = retrieval_fixture(tmp_path, n_sentences=8, translated=True)
        config = RunConfig(method="emd", source=str(source), target=str(target),
                           src_emb=str(emb))
        assert run_retrieval(config)["metrics"]["p_at_1"] == 1.0

    def test_three_single_token_sentences(self, tmp_path):
        # forced single-atom plans: every pair distance is one embedding distance
        write_lines(tmp_path / "emb.vec", [
            "3 2", "red 0 0", "green 40 0", "blue 0 40",
        ])
        write_lines(tmp_path / "sents.txt", ["red", "green", "blue"])
        config = RunConfig(method="emd", source=str(tmp_path / "sents.txt"),
                           target=str(tmp_path / "sents.txt"),
                           src_emb=str(tmp_path / "emb.vec"))
        report = run_retrieval(config)
        assert report["metrics"]["p_at_1"] == 1.0
        assert all(q["gold_rank"] == 1 for q in report["per_query"])

    def test_sharp_sinkhorn_matches_exact_ranking(self, small_retrieval):
        source, target, emb = small_retrieval
        base = dict(source=str(source), target=str(target), src_emb=str(emb))
        emd = run_retrieval(RunConfig(method="emd", **base))
        semd = run_retrieval(RunConfig(method="semd", lam=100.0, **base))
        assert semd["metrics"]["p_at_1"] == emd["metrics"]["p_at_1"]

    def test_report_echoes_defaults(self, small_retrieval):
        source, target, emb = small_retrieval
        config = RunConfig(source=str(source), target=str(target), src_emb=str(emb))
        echo = run_retrieval(config)["config"]
        assert echo["k"] == 5
        assert echo["lambda"] == 0.01
        assert echo["method"] == "emd"
        assert echo["tgt_emb"] == str(emb)
        assert echo["jobs"] == 1

    def test_sampled_queries(self, small_retrieval):
        source, target, emb = small_retrieval
        config = RunConfig(source=str(source), target=str(target), src_emb=str(emb),
                           sample=5, sample_seed=3)
        report = run_retrieval(config)
        assert report["corpus"]["n_queries"] == 5
        assert report["corpus"]["sample_size"] == 5
        assert len(report["per_query"]) == 5
        assert report["metrics"]["p_at_1"] == 1.0

    def test_report_and_tsv_files(self, small_retrieval, tmp_path):
        source, target, emb = small_retrieval
        out = tmp_path / "run"
        config = RunConfig(source=str(source), target=str(target), src_emb=str(emb),
                           out=str(out))
        report = run_retrieval(config)
        data = json.loads(Path(report["paths"]["json"]).read_text())
        assert data["metrics"]["p_at_1"] == 1.0
        tsv = Path(report["paths"]["tsv"]).read_text().splitlines()
        assert tsv[0] == "query_id\trank\ttarget_id\tdistance"
        # 12 queries x min(10, 12) rows
        assert len(tsv) == 1 + 12 * 10
        first = tsv[1].split("\t")
        assert first[0] == "q0" and first[1] == "1" and first[2] == "d0"

    def test_jobs_do_not_change_output(self, small_retrieval, tmp_path):
        source, target, emb = small_retrieval
        outputs = []
        for jobs, name in ((1, "serial"), (4, "parallel")):
            out = tmp_path / name
            config = RunConfig(method="emd", source=str(source), target=str(target),
                               src_emb=str(emb), out=str(out), jobs=jobs)
            run_retrieval(config)
            outputs.append(Path(str(out) + ".tsv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_oov_query_counts_as_error_and_miss(self, tmp_path):
        source, target, emb = retrieval_fixture(tmp_path, n_sentences=4)
        crippled = tmp_path / "crippled.txt"
        lines = Path(source).read_text().splitlines()
        lines[2] = "unembeddable mystery words"
        write_lines(crippled, lines)
        config = RunConfig(method="emd", source=str(crippled), target=str(target),
                           src_emb=str(emb))
        report = run_retrieval(config)
        assert report["errors"]["query_errors"] == 1
        assert report["metrics"]["p_at_1"] == 0.75
        errored = [q for q in report["per_query"] if q["error"]]
        assert len(errored) == 1 and errored[0]["gold_rank"] is None

    def test_missing_resource_has_context(self, small_retrieval):
        source, target, _ = small_retrieval
        config = RunConfig(source=str(source), target=str(target),
                           src_emb="/nonexistent/emb.vec")
        with pytest.raises(InputError, match="emb.vec"):
            run_retrieval(config)


class TestRunClassification:
    @pytest.mark.parametrize("method,floor", [("emd", 1.0), ("semd", 1.0), ("nbow", 0.95)])
    def test_zero_shot_two_clusters(self, small_classification, method, floor):
        train, test, emb = small_classification
        config = RunConfig(method=method, train=str(train), test=str(test),
                           src_emb=str(emb), k=5)
        report = run_classification(config)
        assert report["metrics"]["accuracy"] >= floor

    def test_train_equals_test_k1_is_perfect(self, small_classification):
        train, _, emb = small_classification
        config = RunConfig(method="emd", train=str(train), test=str(train),
                           src_emb=str(emb), k=1)
        report = run_classification(config)
        assert report["metrics"]["accuracy"] == 1.0

    def test_confusion_counts_cover_test_set(self, small_classification):
        train, test, emb = small_classification
        config = RunConfig(method="emd", train=str(train), test=str(test),
                           src_emb=str(emb))
        report = run_classification(config)
        total = sum(n for row in report["confusion"].values() for n in row.values())
        assert total == report["corpus"]["n_test"]

    def test_report_written(self, small_classification, tmp_path):
        train, test, emb = small_classification
        out = tmp_path / "cls"
        config = RunConfig(method="nbow", train=str(train), test=str(test),
                           src_emb=str(emb), out=str(out))
        report = run_classification(config)
        data = json.loads(Path(report["paths"]["json"]).read_text())
        assert data["task"] == "classification"


class TestRunSweep:
    def test_grid_over_k_only_for_emd(self, small_classification):
        train, test, emb = small_classification
        config = RunConfig(method="emd", train=str(train), test=str(test),
                           src_emb=str(emb))
        report = run_sweep(config, k_grid=(1, 3), lambda_grid=(0.01, 0.1))
        assert {cell["k"] for cell in report["cells"]} == {1, 3}
        assert all(cell["lambda"] is None for cell in report["cells"])
        assert report["best"]["accuracy"] == max(c["accuracy"] for c in report["cells"])

    def test_grid_includes_lambda_for_semd(self, small_classification):
        train, test, emb = small_classification
        config = RunConfig(method="semd", train=str(train), test=str(test),
                           src_emb=str(emb))
        report = run_sweep(config, k_grid=(1, 5), lambda_grid=(0.01, 1.0))
        assert len(report["cells"]) == 4
        assert {cell["lambda"] for cell in report["cells"]} == {0.01, 1.0}

    def test_cells_match_single_runs(self, small_classification):
        train, test, emb = small_classification
        base = dict(train=str(train), test=str(test), src_emb=str(emb))
        sweep = run_sweep(RunConfig(method="emd", **base), k_grid=(3,),
                          lambda_grid=(0.01,))
        single = run_classification(RunConfig(method="emd", k=3, **base))
        assert sweep["cells"][0]["accuracy"] == single["metrics"]["accuracy"]


class TestRunRankSummary:
    def _report(self, tmp_path, name, method, pair, p_at_1, emb="emb.vec"):
        report = {
            "task": "retrieval",
            "config": {"method": method, "pair": pair, "src_emb": emb},
            "metrics": {"p_at_1": p_at_1},
        }
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(report), encoding="utf-8")
        return str(path)

    def test_single_report_rank_one(self, tmp_path):
        path = self._report(tmp_path, "r0", "emd", "en-de", 0.9)
        summary = run_rank_summary([path])
        assert summary["rows"][0]["average_rank"] == 1.0

    def test_dominant_method(self, tmp_path):
        paths = [
            self._report(tmp_path, "a1", "emd", "en-de", 0.9),
            self._report(tmp_path, "a2", "emd", "en-it", 0.8),
            self._report(tmp_path, "b1", "nbow", "en-de", 0.5),
            self._report(tmp_path, "b2", "nbow", "en-it", 0.4),
        ]
        summary = run_rank_summary(paths)
        by_method = {row["method"]: row["average_rank"] for row in summary["rows"]}
        assert by_method["emd/emb"] == 1.0
        assert by_method["nbow/emb"] == 2.0

    def test_full_tie_averages(self, tmp_path):
        paths = [
            self._report(tmp_path, "a", "emd", "en-de", 0.7),
            self._report(tmp_path, "b", "semd", "en-de", 0.7),
        ]
        summary = run_rank_summary(paths)
        assert [row["average_rank"] for row in summary["rows"]] == [1.5, 1.5]

    def test_coverage_mismatch_rejected(self, tmp_path):
        paths = [
            self._report(tmp_path, "a1", "emd", "en-de", 0.9),
            self._report(tmp_path, "a2", "emd", "en-it", 0.8),
            self._report(tmp_path, "b1", "nbow", "en-de", 0.5),
        ]
        with pytest.raises(InputError):
            run_rank_summary(paths)

    def test_mixed_metrics_rejected(self, tmp_path):
        retrieval = self._report(tmp_path, "a", "emd", "en-de", 0.9)
        classification = tmp_path / "c.json"
        classification.write_text(json.dumps({
            "task": "classification",
            "config": {"method": "nbow", "pair": "en-de", "src_emb": "emb.vec"},
            "metrics": {"accuracy": 0.8},
        }), encoding="utf-8")
        with pytest.raises(InputError):
            run_rank_summary([retrieval, str(classification)])

    def test_summary_files(self, tmp_path):
        paths = [
            self._report(tmp_path, "a", "emd", "en-de", 0.9),
            self._report(tmp_path, "b", "nbow", "en-de", 0.5),
        ]
        summary = run_rank_summary(paths, out=str(tmp_path / "summary"))
        tsv = Path(summary["paths"]["tsv"]).read_text().splitlines()
        assert tsv[0] == "method\ten-de\taverage_rank"
        assert len(tsv) == 3


class TestExplainPair:
    def test_emd_detail(self, tmp_path):
        _, _, emb = classification_fixture(tmp_path, n_train_per=2, n_test_per=2)
        config = RunConfig(method="emd", src_emb=str(emb))
        detail = explain_pair(config, "sa0 sa1", "sb0 sb1")
        assert detail["distance"] > 5.0
        assert len(detail["cost_matrix"]) == 2
        assert len(detail["plan"]) == 2
        assert detail["source"]["support"] == ["sa0", "sa1"]

    def test_nbow_detail_has_distance_only(self, tmp_path):
        _, _, emb = classification_fixture(tmp_path, n_train_per=2, n_test_per=2)
        config = RunConfig(method="nbow", src_emb=str(emb))
        detail = explain_pair(config, "sa0", "sa0")
        assert detail["distance"] == pytest.approx(0.0, abs=1e-9)
        assert detail["plan"] is None

    def test_oov_side_reports_error(self, tmp_path):
        _, _, emb = classification_fixture(tmp_path, n_train_per=2, n_test_per=2)
        config = RunConfig(method="emd", src_emb=str(emb))
        detail = explain_pair(config, "sa0", "totally unknown words")
        assert detail["distance"] is None
        assert detail["error"]
