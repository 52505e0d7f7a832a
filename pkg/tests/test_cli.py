import json
import shutil
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from conftest import CORPUS
from kiwi.cli import EXIT_BACKEND, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, main


@pytest.fixture
def workdir(tmp_path):
    notes = tmp_path / "notes"
    notes.mkdir()
    for f in CORPUS.glob("*.txt"):
        shutil.copy(f, notes / f.name)
    gold = tmp_path / "gold"
    gold.mkdir()
    for f in CORPUS.glob("*.kiwi.json"):
        shutil.copy(f, gold / f.name)
    lex = tmp_path / "lex.json"
    shutil.copy(CORPUS / "lexicon.json", lex)
    return tmp_path


def _mock_url(workdir):
    return f"mock:{workdir / 'lex.json'}"


def test_annotate_and_eval_roundtrip(workdir, capsys):
    out = workdir / "out"
    rc = main(["annotate", "--input", str(workdir / "notes"),
               "--output", str(out), "--backend", _mock_url(workdir)])
    assert rc == EXIT_OK
    assert sorted(p.name for p in out.glob("*.kiwi.json")) == [
        "n1.kiwi.json", "n2.kiwi.json", "n3.kiwi.json",
    ]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["request_counts"]["ner"] == 6
    assert manifest["failures"] == []

    rc = main(["eval", "--gold", str(workdir / "gold"), "--pred", str(out),
               "--task", "both", "--mode", "both", "--json"])
    assert rc == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["reports"]) == 4
    for report in payload["reports"]:
        assert report["f1"] == 1.0


def test_annotate_rerun_byte_identical(workdir):
    out1, out2 = workdir / "o1", workdir / "o2"
    for out in (out1, out2):
        rc = main(["annotate", "--input", str(workdir / "notes"),
                   "--output", str(out), "--backend", _mock_url(workdir)])
        assert rc == EXIT_OK
    for name in ("n1", "n2", "n3"):
        a = (out1 / f"{name}.kiwi.json").read_bytes()
        b = (out2 / f"{name}.kiwi.json").read_bytes()
        assert a == b
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    m1.pop("timings")
    m2.pop("timings")
    assert m1 == m2


def test_annotate_gold_re_input(workdir):
    out = workdir / "outg"
    rc = main(["annotate", "--input", str(workdir / "notes"),
               "--output", str(out), "--backend", _mock_url(workdir),
               "--re-input", "gold", "--gold-dir", str(workdir / "gold")])
    assert rc == EXIT_OK
    rc = main(["eval", "--gold", str(workdir / "gold"), "--pred", str(out),
               "--task", "re", "--mode", "exact"])
    assert rc == EXIT_OK


def test_annotate_brat_format(workdir):
    out = workdir / "outb"
    rc = main(["annotate", "--input", str(workdir / "notes"),
               "--output", str(out), "--backend", _mock_url(workdir),
               "--format", "brat"])
    assert rc == EXIT_OK
    ann = (out / "n1.ann").read_text()
    assert "\ttreatment 11 23\tintervention" in ann


def test_annotate_single_file_input(workdir):
    out = workdir / "out1"
    rc = main(["annotate", "--input", str(workdir / "notes" / "n1.txt"),
               "--output", str(out), "--backend", _mock_url(workdir)])
    assert rc == EXIT_OK
    assert (out / "n1.kiwi.json").is_file()


def test_missing_input_is_config_error(workdir):
    rc = main(["annotate", "--input", str(workdir / "nowhere"),
               "--output", str(workdir / "x"), "--backend", "mock:"])
    assert rc == EXIT_CONFIG


def test_no_backend_is_config_error(workdir, monkeypatch):
    monkeypatch.delenv("KIWI_BACKEND_URL", raising=False)
    rc = main(["annotate", "--input", str(workdir / "notes"),
               "--output", str(workdir / "x")])
    assert rc == EXIT_CONFIG


def test_unknown_config_key_rejected(workdir):
    cfg = workdir / "cfg.json"
    cfg.write_text(json.dumps({"batch_size": 2, "warp_speed": True}))
    rc = main(["annotate", "--input", str(workdir / "notes"),
               "--output", str(workdir / "x"), "--backend", "mock:",
               "--config", str(cfg)])
    assert rc == EXIT_CONFIG


def test_env_backend_url(workdir, monkeypatch):
    monkeypatch.setenv("KIWI_BACKEND_URL", _mock_url(workdir))
    out = workdir / "oute"
    rc = main(["annotate", "--input", str(workdir / "notes"),
               "--output", str(out)])
    assert rc == EXIT_OK


def test_flag_overrides_env(workdir, monkeypatch):
    monkeypatch.setenv("KIWI_BACKEND_URL", "http://127.0.0.1:9")
    out = workdir / "outf"
    rc = main(["annotate", "--input", str(workdir / "notes"),
               "--output", str(out), "--backend", _mock_url(workdir)])
    assert rc == EXIT_OK


def test_config_file_supplies_backend(workdir):
    cfg = workdir / "cfg.json"
    cfg.write_text(json.dumps({"backend_url": _mock_url(workdir)}))
    out = workdir / "outc"
    rc = main(["annotate", "--input", str(workdir / "notes"),
               "--output", str(out), "--config", str(cfg)])
    assert rc == EXIT_OK


def test_unreachable_backend_exit_code(workdir, monkeypatch):
    monkeypatch.delenv("KIWI_BACKEND_URL", raising=False)
    rc = main(["annotate", "--input", str(workdir / "notes"),
               "--output", str(workdir / "x"),
               "--backend", "http://127.0.0.1:9"])
    assert rc == EXIT_BACKEND


class _FlakyOnce(BaseHTTPRequestHandler):
    posts = 0

    def do_HEAD(self):
        self.send_response(200)
        self.end_headers()

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).posts += 1
        if type(self).posts == 1:
            self.send_response(500)
            self.end_headers()
            return
        data = json.dumps({"text": body["prompt"].rsplit(
            "### Input Text: ", 1)[-1].split("\n### Output Text:")[0]}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def test_partial_failure_exit_code(workdir):
    _FlakyOnce.posts = 0
    server = HTTPServer(("127.0.0.1", 0), _FlakyOnce)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        cfg = workdir / "cfg.json"
        cfg.write_text(json.dumps({"max_retries": 0, "batch_size": 1}))
        out = workdir / "outp"
        rc = main(["annotate", "--input", str(workdir / "notes"),
                   "--output", str(out),
                   "--backend", f"http://127.0.0.1:{server.server_port}",
                   "--config", str(cfg)])
        assert rc == EXIT_PARTIAL
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["failures"]) == 1
        assert manifest["failures"][0][0] == "n1"
    finally:
        server.shutdown()


def test_eval_doc_mismatch_is_config_error(workdir):
    out = workdir / "o"
    out.mkdir()
    shutil.copy(CORPUS / "n1.kiwi.json", out / "n9.kiwi.json")
    rc = main(["eval", "--gold", str(workdir / "gold"), "--pred", str(out)])
    assert rc == EXIT_CONFIG


def test_eval_compare_significance(workdir, capsys):
    rc = main(["eval", "--gold", str(workdir / "gold"),
               "--pred", str(workdir / "gold"),
               "--compare", str(workdir / "gold"),
               "--task", "ner", "--mode", "exact",
               "--bootstrap", "50", "--seed", "7", "--json"])
    assert rc == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    sig = payload["significance"][0]
    assert sig["replicates"] == 50
    assert sig["p_value"] >= 0.4
    assert sig["ci95"] == [0.0, 0.0]


def test_stats_output(workdir, capsys):
    rc = main(["stats", "--input", str(workdir / "gold")])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "Documents" in out
    rc = main(["stats", "--input", str(workdir / "gold"), "--json"])
    assert rc == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["documents"] == 3
    assert payload["main_counts"]["problem"] == 3


def test_bench_from_csv(workdir, capsys):
    csv_path = workdir / "ledger.csv"
    rows = ["timestamp,gpu_id,power_w,mem_gb"]
    for i in range(5):
        rows.append(f"{i * 900.0},gpu0,300.0,40.0")
    csv_path.write_text("\n".join(rows) + "\n")
    rc = main(["bench", "--ledger", str(csv_path), "--phase", "inference",
               "--num-gpus", "1", "--notes", "50", "--json"])
    assert rc == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["gpu_hours"] == pytest.approx(1.0)  # 3600 s span
    assert payload["energy_kwh"] == pytest.approx(0.3)
    assert payload["carbon_kg"] == pytest.approx(0.117)
    assert payload["seconds_per_note"] == pytest.approx(72.0)


def test_bench_wall_override(workdir, capsys):
    csv_path = workdir / "ledger.csv"
    csv_path.write_text(
        "timestamp,gpu_id,power_w,mem_gb\n0.0,g,100.0,8.0\n10.0,g,100.0,8.0\n"
    )
    rc = main(["bench", "--ledger", str(csv_path), "--wall-seconds", "7200",
               "--json"])
    assert rc == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["gpu_hours"] == pytest.approx(2.0)


def test_bench_train_epochs(workdir, capsys):
    csv_path = workdir / "ledger.csv"
    csv_path.write_text(
        "timestamp,gpu_id,power_w,mem_gb\n0.0,g,100.0,8.0\n"
    )
    rc = main(["bench", "--ledger", str(csv_path), "--phase", "train",
               "--epochs", "2", "--wall-seconds", str(41.7 * 3600),
               "--json"])
    assert rc == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["gpu_hours_per_epoch"] == pytest.approx(20.85)


def test_bench_bad_csv_is_config_error(workdir):
    bad = workdir / "bad.csv"
    bad.write_text("nope\n")
    assert main(["bench", "--ledger", str(bad)]) == EXIT_CONFIG
    assert main(["bench", "--ledger", str(workdir / "absent.csv")]) == EXIT_CONFIG


def test_convert_json_brat_json(workdir):
    mid = workdir / "mid"
    final = workdir / "final"
    rc = main(["convert", "--from", "json", "--to", "brat",
               "--input", str(workdir / "gold"), "--output", str(mid),
               "--text-dir", str(workdir / "notes")])
    assert rc == EXIT_OK
    assert sorted(p.name for p in mid.glob("*.ann")) == [
        "n1.ann", "n2.ann", "n3.ann",
    ]
    rc = main(["convert", "--from", "brat", "--to", "json",
               "--input", str(mid), "--output", str(final),
               "--text-dir", str(workdir / "notes")])
    assert rc == EXIT_OK
    for name in ("n1", "n2", "n3"):
        a = json.loads((workdir / "gold" / f"{name}.kiwi.json").read_text())
        b = json.loads((final / f"{name}.kiwi.json").read_text())
        assert a == b


def test_convert_json_to_bio(workdir):
    out = workdir / "bio"
    rc = main(["convert", "--from", "json", "--to", "bio",
               "--input", str(workdir / "gold"), "--output", str(out),
               "--text-dir", str(workdir / "notes")])
    assert rc == EXIT_OK
    tsv = (out / "n1.bio.tsv").read_text()
    assert "Hgb\t35\t38\tB-test" in tsv


def test_convert_bio_to_json(workdir):
    bio = workdir / "bio"
    rc = main(["convert", "--from", "json", "--to", "bio",
               "--input", str(workdir / "gold"), "--output", str(bio),
               "--text-dir", str(workdir / "notes")])
    assert rc == EXIT_OK
    back = workdir / "back"
    rc = main(["convert", "--from", "bio", "--to", "json",
               "--input", str(bio), "--output", str(back),
               "--text-dir", str(workdir / "notes")])
    assert rc == EXIT_OK
    payload = json.loads((back / "n1.kiwi.json").read_text())
    got = {(m["type"], m["start"], m["end"]) for m in payload["mentions"]}
    gold = json.loads((workdir / "gold" / "n1.kiwi.json").read_text())
    expected = {(m["type"], m["start"], m["end"]) for m in gold["mentions"]
                if m["kind"] == "main"}
    assert got == expected


def test_convert_same_format_rejected(workdir):
    rc = main(["convert", "--from", "json", "--to", "json",
               "--input", str(workdir / "gold"),
               "--output", str(workdir / "x")])
    assert rc == EXIT_CONFIG
