import json
import subprocess
import sys

import pytest

from txsynth.cli import EXIT_CONFIG, EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from txsynth.defaults import default_distributions
from txsynth.distmodel import load_distributions
from txsynth.stats import compare

SMALL = ["--cards", "300", "--stores", "60", "--days", "20", "--seed", "3"]


def gen(tmp_path, *extra, name="tx.csv"):
    out = tmp_path / name
    assert main(["generate", *SMALL, *extra, "-o", str(out)]) == EXIT_OK
    return out


def test_generate_writes_file_and_manifest(tmp_path, capsys):
    out = gen(tmp_path)
    lines = out.read_text().splitlines()
    assert lines[0] == "day,card,hour,amount,store"
    day, card, hour, amount, store = lines[1].split(",")
    assert amount.endswith(".5") and 0 <= int(hour) < 24
    m = json.loads((tmp_path / "tx.csv.manifest.json").read_text())
    assert m["record_count"] == len(lines) - 1
    assert m["seed"] == 3 and len(m["config_hash"]) == 64 and m["version"]
    assert "records:" in capsys.readouterr().out


def test_zero_days_gives_header_only(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["generate", "--days", "0", "-o", str(out)]) == EXIT_OK
    assert out.read_text() == "day,card,hour,amount,store\n"


def test_manifest_replay_is_byte_identical(tmp_path):
    out = gen(tmp_path, "--burst-sigma", "0.8", "--swap-prob", "0.05")
    again = tmp_path / "again.csv"
    assert main(["generate", "--manifest", str(tmp_path / "tx.csv.manifest.json"),
                 "-o", str(again)]) == EXIT_OK
    assert again.read_bytes() == out.read_bytes()
    m1 = json.loads((tmp_path / "tx.csv.manifest.json").read_text())
    m2 = json.loads((tmp_path / "again.csv.manifest.json").read_text())
    assert m1["config_hash"] == m2["config_hash"]
    assert m1["output_sha256"] == m2["output_sha256"]


def test_workers_do_not_change_output(tmp_path):
    a = gen(tmp_path, name="a.csv")
    b = gen(tmp_path, "--workers", "3", name="b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_validate_self_consistent(tmp_path, capsys):
    args = ["--cards", "2000", "--stores", "1000", "--days", "100", "--seed", "5"]
    out = tmp_path / "t.csv"
    assert main(["generate", *args, "-o", str(out)]) == EXIT_OK
    hist = tmp_path / "h"
    rc = main(["validate", str(out), *args, "--histograms", str(hist),
               "--report", str(tmp_path / "r.txt")])
    text = capsys.readouterr().out
    assert rc == EXIT_OK, text
    assert "passed: true" in text
    assert len(list(hist.glob("*.tsv"))) == 12
    assert text.endswith((tmp_path / "r.txt").read_text())


def test_validate_mismatched_config_fails(tmp_path, capsys):
    out = gen(tmp_path)
    d = default_distributions().to_mapping()
    d["quantity"] = [1.0] * 50
    cfg = tmp_path / "flat.json"
    cfg.write_text(json.dumps(d))
    rc = main(["validate", str(out), *SMALL, "--config", str(cfg)])
    assert rc == EXIT_VALIDATION
    assert "amount" in capsys.readouterr().err


def test_validate_empty_file(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("")
    assert main(["validate", str(p)]) == EXIT_DATA
    assert "EmptyDataError" in capsys.readouterr().err
    p.write_text("day,card,hour,amount,store\n")
    assert main(["validate", str(p)]) == EXIT_DATA


def test_validate_missing_input(tmp_path):
    assert main(["validate", str(tmp_path / "nope.csv")]) == EXIT_IO


def test_fit_then_generate_round_trip(tmp_path, capsys):
    out = gen(tmp_path, "--cards", "2000", "--days", "60")
    fitted = tmp_path / "fit.json"
    assert main(["fit", str(out), "-o", str(fitted), "--amount-cpd",
                 str(tmp_path / "cpd.tsv")]) == EXIT_OK
    summary = capsys.readouterr().out
    assert "parse_errors: 0" in summary and "records:" in summary
    d = load_distributions(fitted)
    ref = default_distributions()
    for k in ("hourly", "daily", "quantity"):
        assert compare(getattr(d, k).weights, getattr(ref, k).weights)[0] < 0.05
    out2 = tmp_path / "second.csv"
    assert main(["generate", *SMALL, "--config", str(fitted), "-o", str(out2)]) == EXIT_OK
    assert (tmp_path / "cpd.tsv").read_text().startswith("amount\tcpd\n0\t1\n")


def test_fit_bad_inputs(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("hello world\nthis is, not, a, transaction, log\n")
    # a one-column header cannot be mapped onto five fields
    assert main(["fit", str(p), "-o", str(tmp_path / "o.json")]) == EXIT_CONFIG
    p.write_text("a,b,c,d,e\nthis,is,not,a,log\n")
    assert main(["fit", str(p), "-o", str(tmp_path / "o.json")]) == EXIT_DATA
    p.write_text("")
    assert main(["fit", str(p), "-o", str(tmp_path / "o.json")]) == EXIT_DATA
    assert main(["fit", str(tmp_path / "missing"), "-o", str(tmp_path / "o.json")]) == EXIT_IO
    assert not (tmp_path / "o.json").exists()


def test_fit_error_budget(tmp_path):
    p = tmp_path / "log.csv"
    p.write_text("day,card,hour,amount,store\n0,1,5,10,1\n0,1,99,10,1\n1,2,3,40,2\n")
    assert main(["fit", str(p), "-o", str(tmp_path / "o.json")]) == EXIT_DATA
    assert main(["fit", str(p), "-o", str(tmp_path / "o.json"), "--max-errors", "1"]) == EXIT_OK


def test_fit_custom_columns(tmp_path):
    p = tmp_path / "log.tsv"
    p.write_text("0;78;87.5;17;1\n1;79;37.5;18;1\n")
    rc = main(["fit", str(p), "-o", str(tmp_path / "o.json"), "--delimiter", ";",
               "--header", "no", "--columns", "day=0,store=1,amount=2,hour=3,card=4"])
    assert rc == EXIT_OK
    assert main(["fit", str(p), "-o", str(tmp_path / "o.json"), "--columns", "day"]) == EXIT_CONFIG


def test_inspect(tmp_path, capsys):
    out = gen(tmp_path)
    assert main(["inspect", str(out), "--histograms", str(tmp_path / "p")]) == EXIT_OK
    assert "transactions:" in capsys.readouterr().out
    assert len(list((tmp_path / "p").glob("*.tsv"))) == 6


def test_inspect_unordered_foreign_file(tmp_path, capsys):
    p = tmp_path / "x.csv"
    p.write_text("user,day,hour,quantity,store\n1,3,10,20,1\n1,0,10,20,1\n")
    assert main(["inspect", str(p)]) == EXIT_OK
    assert "transactions: 2" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["generate", "--cards", "0", "-o", "x.csv"],
    ["generate", "--swap-prob", "2", "-o", "x.csv"],
    ["generate", "--burst-sigma", "-1", "-o", "x.csv"],
    ["generate", "--start-dow", "9", "-o", "x.csv"],
    ["generate", "--config", "does-not-exist.json", "-o", "x.csv"],
    ["generate", "--manifest", "does-not-exist.json", "-o", "x.csv"],
])
def test_config_errors(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_CONFIG
    assert not (tmp_path / "x.csv").exists()


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"hourly": [1, 2]}')
    assert main(["generate", "--config", str(cfg), "-o", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_config_dir_env(tmp_path, monkeypatch):
    d = default_distributions().to_mapping()
    d["hourly"] = [0.0] * 24
    d["hourly"][4] = 1.0
    (tmp_path / "distributions.json").write_text(json.dumps(d))
    monkeypatch.setenv("TXSYNTH_CONFIG_DIR", str(tmp_path))
    out = gen(tmp_path)
    hours = {line.split(",")[2] for line in out.read_text().splitlines()[1:]}
    assert hours == {"4"}


def test_unwritable_output(tmp_path):
    rc = main(["generate", *SMALL, "-o", str(tmp_path / "no" / "such" / "dir.csv")])
    assert rc == EXIT_IO


def test_corrupt_native_file(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("day,card,hour,amount,store\n0,1,30,12.5,2\n")
    assert main(["inspect", str(p)]) == EXIT_DATA


def test_usage_error_exit_code():
    r = subprocess.run([sys.executable, "-m", "txsynth.cli", "generate"], capture_output=True)
    assert r.returncode == EXIT_CONFIG


def test_dump_population(tmp_path):
    gen(tmp_path, "--dump-population", str(tmp_path / "pop"))
    assert (tmp_path / "pop" / "cards.csv").read_text().count("\n") == 301
    assert (tmp_path / "pop" / "stores.csv").read_text().count("\n") == 61
