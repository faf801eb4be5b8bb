import csv
import json
import shutil
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from probinv import corpus
from probinv.cli import (
    EXIT_INAPPLICABLE,
    EXIT_INPUT,
    EXIT_NO_INVARIANT,
    EXIT_NOT_ADMISSIBLE,
    EXIT_OK,
    EXIT_REFUSED,
    EXIT_USAGE,
    main,
)


def schema(name):
    return json.loads(resources.files("probinv").joinpath(f"schemas/{name}.schema.json").read_text())


def run(tmp_path, *argv):
    out = tmp_path / "out.json"
    code = main([*argv, "--json", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_synthesize_report_validates(tmp_path):
    code, data = run(tmp_path, "synthesize", "geo", "1")
    assert code == EXIT_OK
    jsonschema.validate(data, schema("synthesize"))
    assert data["counterexamples"] <= 4
    assert data["status"] == "invariant"


def test_synthesize_finite_includes_oracle(tmp_path):
    code, data = run(tmp_path, "synthesize", "toy", "1")
    assert code == EXIT_OK
    assert data["oracle"] == {"checked": True, "states": 2, "admissible": True}
    jsonschema.validate(data, schema("synthesize"))


def test_synthesize_without_invariant(tmp_path):
    code, data = run(tmp_path, "synthesize", "toy", "2", "--rounds", "2")
    assert code == EXIT_NO_INVARIANT
    assert data["status"] == "exhausted"
    jsonschema.validate(data, schema("synthesize"))


def test_synthesize_inapplicable_strategy(tmp_path):
    code, _ = run(tmp_path, "synthesize", "geo", "1", "--strategy", "static")
    assert code == EXIT_INAPPLICABLE


def test_synthesize_writes_invariant_and_trace(tmp_path):
    inv, trace = tmp_path / "inv.txt", tmp_path / "trace.jsonl"
    code, data = run(tmp_path, "synthesize", "geo", "1", "--out", str(inv), "--trace", str(trace), "--dump-templates")
    assert code == EXIT_OK
    assert inv.read_text().strip() == data["invariant"]
    events = [json.loads(l)["event"] for l in trace.read_text().splitlines()]
    assert events[0] == "template" and "candidate" in events
    assert data["templates"][0]["round"] == 1
    # the written invariant verifies
    code, v = run(tmp_path, "verify", "geo", "1", str(inv))
    assert code == EXIT_OK and v["admissible"] is True


def test_verify_reports(tmp_path):
    good = tmp_path / "good.txt"
    good.write_text("[c=0]*(x+1) + [!(c=0)]*x\n")
    bad = tmp_path / "bad.txt"
    bad.write_text("[c=0]*(x+1) + [!(c=0)]*(x+1)\n")
    code, data = run(tmp_path, "verify", "geo", "1", str(good))
    assert code == EXIT_OK
    jsonschema.validate(data, schema("verify"))
    code, data = run(tmp_path, "verify", "geo", "1", str(bad))
    assert code == EXIT_NOT_ADMISSIBLE
    assert data["counterexample"]["kind"] in ("inductivity", "safety")
    jsonschema.validate(data, schema("verify"))


def test_verify_zero_on_brp(tmp_path):
    z = tmp_path / "z.txt"
    z.write_text("0\n")
    code, data = run(tmp_path, "verify", "brp_overview", "1", str(z))
    assert code == EXIT_NOT_ADMISSIBLE
    assert data["counterexample"]["kind"] == "inductivity"


def test_verify_flipped_coefficient(tmp_path):
    f = tmp_path / "i.txt"
    f.write_text("[fail<10 & sent<8000000]*(9/80000000*sent + 79991/720000000*fail + 9/10) + [fail=10]\n")
    code, data = run(tmp_path, "verify", "brp_overview", "1", str(f))
    assert code == EXIT_NOT_ADMISSIBLE
    assert data["counterexample"]["kind"] in ("well-definedness", "inductivity", "safety")


def test_verify_accepts_report(tmp_path):
    rep = tmp_path / "rep.json"
    assert main(["synthesize", "toy", "1", "--json", str(rep)]) == EXIT_OK
    code, data = run(tmp_path, "verify", "toy", "1", str(rep))
    assert code == EXIT_OK
    assert data["oracle"]["admissible"] is True


def test_one_shot(tmp_path):
    code, data = run(tmp_path, "one-shot", "toy", "1")
    assert code == EXIT_OK
    jsonschema.validate(data, schema("one-shot"))
    code, data = run(tmp_path, "one-shot", "toy", "2")
    assert code == EXIT_NO_INVARIANT
    code, data = run(tmp_path, "one-shot", "brp_overview", "1")
    assert code == EXIT_REFUSED and data["status"] == "refused"


def test_oracle_command(tmp_path):
    dump = tmp_path / "chain.txt"
    code, data = run(tmp_path, "oracle", "gridsmall", "1", "--state", "a=0,b=0", "--dump", str(dump))
    assert code == EXIT_OK
    jsonschema.validate(data, schema("oracle"))
    assert data["lfp"] == "1/2" and data["g_dominates"] is True
    assert dump.read_text().startswith("# variables a,b")
    code, _ = run(tmp_path, "oracle", "geo", "1")
    assert code == EXIT_REFUSED


def test_dump_charfun(tmp_path, capsys):
    assert main(["dump-charfun", "toy", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("T ") and "Phi_f(T)" in out


@pytest.mark.parametrize("argv,code", [
    (["synthesize"], EXIT_USAGE),
    (["frobnicate"], EXIT_USAGE),
    (["synthesize", "nosuchbench", "1"], EXIT_INPUT),
    (["synthesize", "toy", "9"], EXIT_INPUT),
    (["synthesize", "toy", "1", "--coop-d", "1/2"], EXIT_USAGE),
])
def test_usage_and_input_errors(argv, code):
    assert main(argv) == code


def test_parse_error_exit(tmp_path):
    prog = tmp_path / "p.pgcl"
    prog.write_text("nat x; while(x<1 { skip }")
    prop = tmp_path / "p.1.prop"
    prop.write_text("post: x\npre: INF\n")
    assert main(["synthesize", str(prog), str(prop)]) == EXIT_INPUT


def test_bench_empty_dir(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["bench", str(tmp_path), "--csv", str(out)]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert len(rows) == 1 and rows[0][0] == "benchmark"


def test_bench_small_corpus(tmp_path):
    src = resources.files("probinv").joinpath("corpus")
    for name in ("toy.pgcl", "toy.1.prop", "toy.2.prop"):
        shutil.copy(src.joinpath(name), tmp_path / name)
    out, js = tmp_path / "r.csv", tmp_path / "r.json"
    code = main(["bench", str(tmp_path), "--strategies", "static", "inductivity", "--jobs", "2",
                 "--timeout", "60", "--rounds", "2", "--csv", str(out), "--json", str(js)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4
    by = {(r["property"], r["strategy"]): r for r in rows}
    assert by[("1", "static")]["status"] == "invariant"
    assert by[("2", "inductivity")]["status"] == "exhausted"
    jsonschema.validate(json.loads(js.read_text()), schema("bench"))


def test_fixed_seed_is_repeatable(tmp_path):
    counts = []
    for _ in range(2):
        code, data = run(tmp_path, "synthesize", "brp_overview", "1", "--seed", "7")
        assert code == EXIT_OK
        counts.append(data["counterexamples"])
    assert counts[0] == counts[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "probinv", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "synthesize" in proc.stdout


def test_corpus_names_resolve():
    assert "brp" in corpus.names() and "gridsmall" in corpus.names()
    assert corpus.property_ids("brp") == [1, 2, 3]
