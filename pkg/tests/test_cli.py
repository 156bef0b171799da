import hashlib
import io
import json
import os

import pytest

from citesumm.cli import main
from citesumm.corpus import write_corpus
from citesumm.datasets import make_clustered_corpus


def digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


@pytest.fixture
def demo_paths(tmp_path, demo_corpus):
    corpus_path = tmp_path / "corpus.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        write_corpus(demo_corpus, fh)
    return tmp_path, str(corpus_path)


@pytest.fixture(scope="module")
def synthetic_paths(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("synth")
    syn = make_clustered_corpus(n_papers=24, n_cold=4, seed=2)
    corpus_path = tmp / "synth.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        write_corpus(syn.corpus, fh)
    emb_path = tmp / "emb32.seb"
    assert main(["embed", "tfidf", "--corpus", str(corpus_path),
                 "--dim", "32", "--out", str(emb_path)]) == 0
    return tmp, str(corpus_path), str(emb_path)


class TestIngest:
    def test_manifest_to_stdout(self, demo_paths, capsys):
        _, corpus_path = demo_paths
        assert main(["ingest", corpus_path]) == 0
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["papers"] == 3
        assert manifest["edges"] == 2

    def test_inductive_mode_counts_cross_split(self, demo_paths, capsys):
        _, corpus_path = demo_paths
        assert main(["ingest", corpus_path, "--mode", "inductive"]) == 0
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["cross_split_dropped"] == 2
        assert manifest["edges"] == 0

    def test_missing_corpus_exits_3_with_path(self, capsys):
        code = main(["ingest", "/nonexistent/corpus.jsonl"])
        assert code == 3
        assert "/nonexistent/corpus.jsonl" in capsys.readouterr().err


class TestEmbed:
    def test_tfidf_then_load(self, demo_paths, capsys):
        tmp, corpus_path = demo_paths
        out = str(tmp / "table.seb")
        assert main(["embed", "tfidf", "--corpus", corpus_path,
                     "--dim", "64", "--out", out]) == 0
        assert main(["embed", "load", out]) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["dim"] == 64
        assert info["rows"] > 0

    def test_bad_dim_exits_3(self, demo_paths, capsys):
        tmp, corpus_path = demo_paths
        code = main(["embed", "tfidf", "--corpus", corpus_path,
                     "--dim", "33", "--out", str(tmp / "t.seb")])
        assert code == 3
        assert "power of two" in capsys.readouterr().err


class TestMusRun:
    def test_three_records_on_demo_corpus(self, demo_paths):
        tmp, corpus_path = demo_paths
        emb = str(tmp / "t.seb")
        out = str(tmp / "summaries.jsonl")
        assert main(["embed", "tfidf", "--corpus", corpus_path, "--dim", "64",
                     "--out", emb]) == 0
        assert main(["mus", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--out", out]) == 0
        records = [json.loads(line) for line in open(out)]
        assert len(records) == 3
        for record in records:
            assert set(record) == {"paper_id", "selected", "sentences", "scores"}

    def test_byte_identical_across_jobs(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        out1 = str(tmp / "s1.jsonl")
        out4 = str(tmp / "s4.jsonl")
        assert main(["mus", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--out", out1, "--jobs", "1"]) == 0
        assert main(["mus", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--out", out4, "--jobs", "4"]) == 0
        assert digest(out1) == digest(out4)

    def test_rerun_is_idempotent(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        out = str(tmp / "idem.jsonl")
        assert main(["mus", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--out", out]) == 0
        first = digest(out)
        assert main(["mus", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--out", out]) == 0
        assert digest(out) == first

    def test_ablation_flags_change_output(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        base = str(tmp / "base.jsonl")
        nodoc = str(tmp / "nodoc.jsonl")
        assert main(["mus", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--out", base]) == 0
        assert main(["mus", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--out", nodoc, "--no-document"]) == 0
        assert digest(base) != digest(nodoc)

    def test_unknown_flag_rejected(self, demo_paths):
        _, corpus_path = demo_paths
        with pytest.raises(SystemExit) as exc:
            main(["mus", "run", "--corpus", corpus_path, "--embeddings", "x",
                  "--out", "y", "--frobnicate"])
        assert exc.value.code == 2


class TestAdapt:
    def test_same_seed_byte_identical(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        out1 = str(tmp / "a1.seb")
        out2 = str(tmp / "a2.seb")
        args = ["adapt", "--corpus", corpus_path, "--embeddings", emb,
                "--steps", "10", "--seed", "7"]
        assert main(args + ["--out", out1]) == 0
        assert main(args + ["--out", out2]) == 0
        assert digest(out1) == digest(out2)

    def test_seed_required(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        with pytest.raises(SystemExit) as exc:
            main(["adapt", "--corpus", corpus_path, "--embeddings", emb,
                  "--out", str(tmp / "a.seb")])
        assert exc.value.code == 2

    def test_loss_log_written(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        out = str(tmp / "a3.seb")
        log = str(tmp / "a3.log.jsonl")
        assert main(["adapt", "--corpus", corpus_path, "--embeddings", emb,
                     "--steps", "5", "--seed", "1", "--out", out, "--log", log]) == 0
        rows = [json.loads(line) for line in open(log)]
        assert len(rows) == 6  # per-step losses plus the final evaluation
        assert all("loss" in row for row in rows)


class TestGss:
    def test_train_same_seed_byte_identical(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        ck1 = str(tmp / "m1.gssp")
        ck2 = str(tmp / "m2.gssp")
        args = ["gss", "train", "--corpus", corpus_path, "--embeddings", emb,
                "--epochs", "2", "--seed", "3"]
        assert main(args + ["--out", ck1]) == 0
        assert main(args + ["--out", ck2]) == 0
        assert digest(ck1) == digest(ck2)

    def test_train_with_ablation_flags(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        ckpt = str(tmp / "ablated.gssp")
        assert main(["gss", "train", "--corpus", corpus_path, "--embeddings", emb,
                     "--epochs", "1", "--seed", "0", "--no-multi", "--no-fusion",
                     "--out", ckpt]) == 0

    def test_run_with_inference_ablation(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        ckpt = str(tmp / "full.gssp")
        assert main(["gss", "train", "--corpus", corpus_path, "--embeddings", emb,
                     "--epochs", "1", "--seed", "0", "--out", ckpt]) == 0
        base = str(tmp / "full_run.jsonl")
        ablated = str(tmp / "nofusion_run.jsonl")
        assert main(["gss", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--checkpoint", ckpt, "--out", base]) == 0
        assert main(["gss", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--checkpoint", ckpt, "--out", ablated, "--no-fusion"]) == 0
        assert digest(base) != digest(ablated)

    def test_run_consumes_checkpoint(self, synthetic_paths):
        tmp, corpus_path, emb = synthetic_paths
        ckpt = str(tmp / "run.gssp")
        out = str(tmp / "gss_summaries.jsonl")
        log = str(tmp / "train.log.jsonl")
        assert main(["gss", "train", "--corpus", corpus_path, "--embeddings", emb,
                     "--epochs", "2", "--seed", "0", "--out", ckpt, "--log", log]) == 0
        rows = [json.loads(line) for line in open(log)]
        assert {"epoch", "train_loss", "val_rgl", "link_acc"} <= set(rows[0])
        assert main(["gss", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--checkpoint", ckpt, "--out", out]) == 0
        records = [json.loads(line) for line in open(out)]
        assert records and all("selected" in r for r in records)


class TestEval:
    def test_rouge_report(self, synthetic_paths, capsys):
        tmp, corpus_path, emb = synthetic_paths
        summaries = str(tmp / "for_rouge.jsonl")
        assert main(["mus", "run", "--corpus", corpus_path, "--embeddings", emb,
                     "--out", summaries]) == 0
        assert main(["eval", "rouge", summaries, corpus_path]) == 0
        report = json.loads(capsys.readouterr().out)
        assert {"rg1", "rg2", "rgl", "n_papers", "by_citation_bucket"} <= set(report)
        assert 0.0 <= report["rgl"]["f1"] <= 1.0

    def test_linkpred_report(self, synthetic_paths, capsys):
        tmp, corpus_path, emb = synthetic_paths
        assert main(["eval", "linkpred", "--corpus", corpus_path,
                     "--embeddings", emb, "--split", "all", "--runs", "3"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert {"accuracy_mean", "accuracy_std", "runs"} <= set(report)
        assert report["runs"] == 3

    def test_oracle_labels(self, synthetic_paths, capsys):
        _, corpus_path, _ = synthetic_paths
        assert main(["oracle", "--corpus", corpus_path]) == 0
        rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert len(rows) == 24
        assert all(set(r["labels"]) <= {0, 1} for r in rows)


class TestConfigFile:
    def test_config_supplies_defaults_flags_override(self, demo_paths, capsys):
        tmp, corpus_path = demo_paths
        config = tmp / "run.conf"
        config.write_text("mode = inductive\n# comment line\n")
        assert main(["--config", str(config), "ingest", corpus_path]) == 0
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["mode"] == "inductive"
        assert main(["--config", str(config), "ingest", corpus_path,
                     "--mode", "transductive"]) == 0
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["mode"] == "transductive"

    def test_bad_config_line_exits_3(self, demo_paths, capsys):
        tmp, corpus_path = demo_paths
        config = tmp / "bad.conf"
        config.write_text("just nonsense\n")
        assert main(["--config", str(config), "ingest", corpus_path]) == 3
