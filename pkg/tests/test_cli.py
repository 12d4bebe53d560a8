import json
import pathlib

import numpy as np
import pytest

from tprbench.cli import main
from tprbench.embeddings import EmbeddingTable, load_embeddings, write_embeddings

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
ANNOTATIONS = str(FIXTURES / "annotations.jsonl")
QUERIES = str(FIXTURES / "queries.ufeb")
GALLERY = str(FIXTURES / "gallery.ufeb")


def run_eval(tmp_path, *extra):
    out = tmp_path / "report.json"
    code = main(
        [
            "eval",
            "--annotations", ANNOTATIONS,
            "--query-emb", QUERIES,
            "--gallery-emb", GALLERY,
            "--out", str(out),
            *extra,
        ]
    )
    return code, out


class TestEval:
    def test_writes_json_report(self, tmp_path):
        code, out = run_eval(tmp_path)
        assert code == 0
        report = json.loads(out.read_text())
        assert set(report["rank_k"]) == {"1", "5", "10"}
        assert 0.0 <= report["msd"] < 1.0
        assert 0.0 <= report["map"] <= 1.0
        assert "annotations" in report["provenance"]

    def test_markdown_format(self, tmp_path):
        out = tmp_path / "report.md"
        code = main(
            [
                "eval",
                "--annotations", ANNOTATIONS,
                "--query-emb", QUERIES,
                "--gallery-emb", GALLERY,
                "--out", str(out),
                "--format", "md",
            ]
        )
        assert code == 0
        assert "R@1 | R@5 | R@10 | mAP | mSD" in out.read_text()

    def test_custom_ranks_and_params(self, tmp_path):
        code, out = run_eval(tmp_path, "--ranks", "1,3", "--msd-k", "2.0", "--epsilon", "1e-5")
        assert code == 0
        report = json.loads(out.read_text())
        assert set(report["rank_k"]) == {"1", "3"}
        assert report["config"]["msd_k"] == 2.0
        assert report["config"]["epsilon"] == 1e-5

    def test_per_query_flag(self, tmp_path):
        code, out = run_eval(tmp_path, "--per-query")
        assert code == 0
        report = json.loads(out.read_text())
        assert len(report["per_query"]) == report["num_queries"]

    def test_per_query_absent_by_default(self, tmp_path):
        code, out = run_eval(tmp_path)
        assert "per_query" not in json.loads(out.read_text())

    def test_figure_written(self, tmp_path):
        fig = tmp_path / "dist.png"
        code, out = run_eval(tmp_path, "--fig", str(fig))
        assert code == 0
        assert fig.stat().st_size > 0
        assert "per_query" not in json.loads(out.read_text())

    def test_sim_path(self, tmp_path):
        base_code, base_out = run_eval(tmp_path)
        queries = load_embeddings(QUERIES)
        gallery = load_embeddings(GALLERY)
        from tprbench.evaluation import compute_similarity_matrix, expand_queries
        from tprbench.annotations import load_annotations

        plan = expand_queries(load_annotations(ANNOTATIONS))
        sim = compute_similarity_matrix(
            queries.select(plan.query_ids), gallery.select(plan.gallery_ids)
        )
        sim_table = EmbeddingTable(ids=tuple(plan.query_ids), vectors=sim.astype(np.float32))
        sim_path = tmp_path / "sim.ufeb"
        write_embeddings(sim_table, sim_path)
        out = tmp_path / "by_sim.json"
        code = main(
            ["eval", "--annotations", ANNOTATIONS, "--sim", str(sim_path), "--out", str(out)]
        )
        assert code == 0
        by_sim = json.loads(out.read_text())
        base = json.loads(base_out.read_text())
        # float32 storage rounds the similarities, so compare loosely
        assert by_sim["rank_k"] == base["rank_k"]
        assert by_sim["map"] == pytest.approx(base["map"], abs=1e-6)

    def test_sim_with_wrong_ids_is_input_error(self, tmp_path):
        sim_table = EmbeddingTable(ids=("bogus#0",), vectors=np.ones((1, 10), np.float32))
        sim_path = tmp_path / "sim.ufeb"
        write_embeddings(sim_table, sim_path)
        out = tmp_path / "r.json"
        code = main(
            ["eval", "--annotations", ANNOTATIONS, "--sim", str(sim_path), "--out", str(out)]
        )
        assert code == 1

    def test_missing_embeddings_is_input_error(self, tmp_path):
        out = tmp_path / "r.json"
        code = main(["eval", "--annotations", ANNOTATIONS, "--out", str(out)])
        assert code == 1

    def test_missing_file_is_input_error(self, tmp_path):
        out = tmp_path / "r.json"
        code = main(
            [
                "eval",
                "--annotations", str(tmp_path / "nope.jsonl"),
                "--query-emb", QUERIES,
                "--gallery-emb", GALLERY,
                "--out", str(out),
            ]
        )
        assert code == 1

    def test_usage_error_is_input_error(self):
        assert main(["eval"]) == 1

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_workers_flag_identical_output(self, tmp_path):
        _, out1 = run_eval(tmp_path)
        out8 = tmp_path / "r8.json"
        main(
            [
                "eval",
                "--annotations", ANNOTATIONS,
                "--query-emb", QUERIES,
                "--gallery-emb", GALLERY,
                "--out", str(out8),
                "--workers", "8",
            ]
        )
        assert out1.read_bytes() == out8.read_bytes()


class TestStats:
    def test_writes_stats_and_histogram(self, tmp_path):
        out = tmp_path / "stats.json"
        hist = tmp_path / "hist.csv"
        fig = tmp_path / "hist.png"
        code = main(
            [
                "stats",
                "--annotations", ANNOTATIONS,
                "--out", str(out),
                "--hist", str(hist),
                "--fig", str(fig),
            ]
        )
        assert code == 0
        stats = json.loads(out.read_text())
        assert stats["max_words"] >= stats["min_words"]
        assert stats["num_captions"] == 20
        assert hist.read_text().startswith("word_count,frequency\n")
        assert fig.stat().st_size > 0

    def test_missing_annotations_is_input_error(self, tmp_path):
        code = main(["stats", "--annotations", str(tmp_path / "x.jsonl"), "--out", str(tmp_path / "s.json")])
        assert code == 1


class TestConvert:
    def test_ufeb_to_npz_and_back(self, tmp_path):
        npz = tmp_path / "emb.npz"
        back = tmp_path / "emb.ufeb"
        assert main(["convert", "--in", QUERIES, "--out", str(npz)]) == 0
        assert main(["convert", "--in", str(npz), "--out", str(back), "--to", "ufeb"]) == 0
        assert back.read_bytes() == pathlib.Path(QUERIES).read_bytes()

    def test_corrupt_input_is_input_error(self, tmp_path):
        bad = tmp_path / "bad.ufeb"
        bad.write_bytes(b"UFEBgarbage")
        assert main(["convert", "--in", str(bad), "--out", str(tmp_path / "o.npz")]) == 1
