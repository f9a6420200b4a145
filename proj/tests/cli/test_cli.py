#!/usr/bin/env python3
"""End-to-end checks of the flaky CLI: every command, exit codes, schema, determinism.

usage: test_cli.py <flaky binary> <report.schema.json>
"""
import csv
import filecmp
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

BIN = sys.argv[1]
SCHEMA = json.loads(Path(sys.argv[2]).read_text())
failures = []

SMALL = {"model": {"d_neural": 16, "vocab_cap": 256, "max_seq": 96}, "training": {"epochs": 1, "batch_size": 8}}


def run(*args, expect=0):
    p = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True)
    if p.returncode != expect:
        failures.append(f"{' '.join(map(str, args))}: exit {p.returncode}, expected {expect}\n{p.stderr.strip()}")
    return p


def check(ok, what):
    if not ok:
        failures.append(what)


with tempfile.TemporaryDirectory() as tmp:
    t = Path(tmp)
    corpus = t / "corpus.jsonl"
    cfg = t / "small.json"
    cfg.write_text(json.dumps(SMALL))

    run("--version")
    run("synth", "--out", corpus, "--projects", 12, "--tests", 96, "--flaky-fraction", 0.25, "--seed", 3)
    lines = corpus.read_text().splitlines()
    check(len(lines) == 96, f"synth wrote {len(lines)} records")
    record = json.loads(lines[0])
    check({"id", "project", "code", "label"} == record.keys(), f"record keys {sorted(record)}")

    # mine, features, split, perturb
    run("mine", "--corpus", corpus, "--out", t / "mined", "--n-min", 2)
    vocab = json.loads((t / "mined" / "vocabulary.json").read_text())
    check(vocab["params"]["n_min"] == 2, "--n-min not applied")
    check(len(vocab["categories"]["async_wait"]) > 0, "nothing mined for async_wait")
    check((t / "mined" / "token_rank.csv").read_text().startswith("category,rank,token"), "token_rank.csv header")
    check(json.loads((t / "mined" / "manifest.json").read_text())["command"] == "mine", "mine manifest")

    run("features", "--corpus", corpus, "--vocab", t / "mined" / "vocabulary.json", "--out", t / "features.csv",
        "--tfidf", t / "tfidf.csv")
    rows = list(csv.reader((t / "features.csv").open()))
    check(len(rows) == 97, f"features rows {len(rows)}")
    check(len(rows[1]) == len(rows[0]), "features row width")

    run("split", "--corpus", corpus, "--out", t / "split.json", "--folds", 3, "--seed", 1)
    split = json.loads((t / "split.json").read_text())
    check(split.get("k") == 3, "split k")

    for mode in ("rename", "deadcode", "both"):
        out = t / f"perturbed-{mode}.jsonl"
        run("perturb", "--corpus", corpus, "--mode", mode, "--out", out, "--seed", 2)
        check(len(out.read_text().splitlines()) == 96, f"perturb {mode} size")
        check(Path(str(out) + ".maps.json").exists(), f"perturb {mode} sidecar")

    # train on one fold's training part
    run("train", "--corpus", corpus, "--out", t / "trained", "--split", t / "split.json", "--fold", 0,
        "--config", cfg)
    check((t / "trained" / "checkpoint.bin").stat().st_size > 0, "train checkpoint")
    trace = json.loads((t / "trained" / "trace.json").read_text())
    check(len(trace["epochs"]) == 1, "train epochs from config")

    # run: schema, determinism, flag precedence
    run("run", "--corpus", corpus, "--out", t / "run1", "--config", cfg)
    run("run", "--corpus", corpus, "--out", t / "run2", "--config", cfg)
    report = json.loads((t / "run1" / "report.json").read_text())
    try:
        jsonschema.validate(report, SCHEMA, cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as e:
        failures.append(f"report.json violates the schema: {e.message} at {list(e.absolute_path)}")
    check(filecmp.cmp(t / "run1" / "report.json", t / "run2" / "report.json", shallow=False), "report.json differs")
    for f in range(4):
        rel = Path(f"fold-{f}") / "checkpoint.bin"
        check(filecmp.cmp(t / "run1" / rel, t / "run2" / rel, shallow=False), f"{rel} differs")
    check(len(report["folds"]) == 4, "default folds")
    check(report["variant"] == "full" and report["augmentation"] is True, "default variant")
    for name in ("metrics.md", "f1_table.csv", "drops.csv", "token_rank.csv", "token_groups.csv", "split.json",
                 "manifest.json"):
        check((t / "run1" / name).exists(), f"run did not write {name}")

    run("run", "--corpus", corpus, "--out", t / "run3", "--config", cfg, "--folds", 3, "--no-symbolic",
        "--no-augment", "--top-k", 5, "--epochs", 2)
    r3 = json.loads((t / "run3" / "report.json").read_text())
    check(len(r3["folds"]) == 3, "--folds did not override")
    check(r3["variant"] == "no-symbolic" and r3["augmentation"] is False, "ablation flags ignored")
    check(len(r3["folds"][0]["epoch_loss"]) == 2, "--epochs did not override the config file")
    check(all(len(v) <= 5 for v in r3["folds"][0]["vocabulary"].values()), "--top-k ignored")
    check(r3["config_hash"] != report["config_hash"], "config hash ignores overrides")

    run("run", "--corpus", corpus, "--out", t / "run4", "--config", cfg, "--hardcoded-symbols")
    check(json.loads((t / "run4" / "report.json").read_text())["variant"] == "hardcoded-symbols", "hardcoded variant")

    # report re-renders the same tables
    run("report", "--in", t / "run1" / "report.json", "--out", t / "rendered")
    for name in ("metrics.md", "f1_table.csv", "drops.csv"):
        check((t / "rendered" / name).read_bytes() == (t / "run1" / name).read_bytes(), f"report {name} differs")

    # input errors exit 2
    run(expect=2)
    run("synth", expect=2)
    run("mine", "--corpus", t / "missing.jsonl", "--out", t / "x", expect=2)
    bad_cfg = t / "bad.json"
    bad_cfg.write_text('{"training": {"lr": 1}}')
    run("run", "--corpus", corpus, "--out", t / "x", "--config", bad_cfg, expect=2)
    broken = t / "broken.jsonl"
    broken.write_text(lines[0] + "\n{not json\n")
    run("mine", "--corpus", broken, "--out", t / "x", expect=2)
    single = t / "single.jsonl"
    single.write_text("".join(
        json.dumps({"id": f"p{i}::{i}", "project": f"p{i}", "code": "void t() { a.b(); }", "label": "non_flaky"})
        + "\n" for i in range(6)))
    run("mine", "--corpus", single, "--out", t / "x", expect=2)
    run("perturb", "--corpus", corpus, "--mode", "shuffle", "--out", t / "x.jsonl", expect=2)
    run("report", "--in", cfg, "--out", t / "x", expect=2)
    run("split", "--corpus", corpus, "--out", t / "x.json", "--folds", 1, expect=2)
    run("train", "--corpus", corpus, "--out", t / "x", "--fold", 0, expect=2)

for f in failures:
    print("FAIL:", f)
print("cli:", "FAIL" if failures else "PASS", f"({len(failures)} failures)")
sys.exit(1 if failures else 0)
