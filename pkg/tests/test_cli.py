import io
import subprocess
import sys

import pytest

from mkem.cli import main


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_analyze_row1(tmp_path):
    csv_path = tmp_path / "curves.csv"
    code, out = run("analyze", "--d", 205, "--p", 80, "--m", 10, "--csv", csv_path, "--table")
    assert code == 0
    vals = kv(out)
    assert abs(float(vals["SEC"]) - 258) <= 3
    assert vals["pubkey_bits"] == "128125"
    assert vals["goppa3_mceliece"].endswith("published=1.4805x10^10")
    assert csv_path.read_text().startswith("mu,curve_A_bits")


def test_analyze_preset_and_variant():
    code, out = run("analyze", "--preset", "sec1000", "--binomial-variant", "printed")
    assert code == 0 and kv(out)["binomial"] == "printed"


def test_keygen_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("keygen", "--d", 4, "--p", 1, "--m", 2, "--mu", 0.1, "--seed", 7,
                   "--out", tmp_path / name)[0] == 0
    for ext in ("pk", "sk"):
        assert (tmp_path / f"a.{ext}").read_bytes() == (tmp_path / f"b.{ext}").read_bytes()


def test_encap_decap_agree(tmp_path):
    run("keygen", "--preset", "sec258", "--seed", 1, "--out", tmp_path / "k")
    code, enc = run("encap", "--pk", tmp_path / "k.pk", "--out", tmp_path / "c.ct", "--seed", 2)
    assert code == 0
    code, dec = run("decap", "--sk", tmp_path / "k.sk", "--in", tmp_path / "c.ct")
    assert code == 0
    assert kv(enc)["shared_key"] == kv(dec)["shared_key"]
    # same seed, same bytes
    run("encap", "--pk", tmp_path / "k.pk", "--out", tmp_path / "c2.ct", "--seed", 2)
    assert (tmp_path / "c.ct").read_bytes() == (tmp_path / "c2.ct").read_bytes()


def test_decap_mismatched_pair(tmp_path):
    run("keygen", "--d", 4, "--p", 1, "--m", 2, "--seed", 1, "--out", tmp_path / "small")
    run("keygen", "--d", 5, "--p", 1, "--m", 2, "--seed", 1, "--out", tmp_path / "other")
    run("encap", "--pk", tmp_path / "other.pk", "--out", tmp_path / "c.ct", "--seed", 1)
    code, _ = run("decap", "--sk", tmp_path / "small.sk", "--in", tmp_path / "c.ct")
    assert code == 3


def test_error_classes(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["analyze", "--d", "x"])
    assert e.value.code == 2
    assert run("analyze")[0] == 2
    assert run("analyze", "--d", 3, "--p", 0, "--m", 3)[0] == 3
    assert run("decap", "--sk", tmp_path / "nope.sk", "--in", tmp_path / "nope.ct")[0] == 4
    (tmp_path / "junk.sk").write_bytes(b"junk")
    assert run("decap", "--sk", tmp_path / "junk.sk", "--in", tmp_path / "junk.sk")[0] == 3
    assert run("keygen", "--d", 4, "--p", 1, "--m", 2, "--out", tmp_path / "no" / "dir")[0] == 4
    assert run("mask-exp", "--s", 6, "--r", 3)[0] == 3


def test_attack_sim_and_mask_exp():
    code, out = run("attack-sim", "--trials", 50, "--weight", 5, "--know-discard", "--seed", 3)
    assert code == 0
    vals = kv(out)
    assert int(vals["trials"]) == 50 and "predicted_per_iteration" in vals
    code, chain = run("attack-sim", "--trials", 5, "--max-iterations", 50, "--seed", 3)
    assert code == 0 and "predicted_per_iteration" not in chain
    code, out2 = run("attack-sim", "--trials", 50, "--weight", 5, "--know-discard", "--seed", 3)
    assert out2 == out
    code, out = run("mask-exp")
    vals = kv(out)
    assert code == 0 and vals["pairs"] == "1764" and float(vals["intersection_chi_square"]) == 0


def test_attack_sim_refuses_preset():
    assert run("attack-sim", "--preset", "sec258", "--trials", 1)[0] == 3


def _exchange(tmp_path, *connect_extra):
    serve = subprocess.Popen([sys.executable, "-m", "mkem", "exchange", "serve", "--listen", "127.0.0.1:0",
                              "--seed", "1", "--d", "9", "--p", "2", "--m", "2", "--mu", "0.2"],
                             stdout=subprocess.PIPE, text=True)
    line = serve.stdout.readline().strip()
    assert line.startswith("listening=")
    addr = line.split("=", 1)[1]
    bob = subprocess.run([sys.executable, "-m", "mkem", "exchange", "connect", "--connect", addr,
                          "--seed", "2", *connect_extra], capture_output=True, text=True, timeout=30)
    alice_out, _ = serve.communicate(timeout=30)
    return serve.returncode, alice_out, bob.returncode, bob.stdout


def test_exchange_subcommands(tmp_path):
    a_code, a_out, b_code, b_out = _exchange(tmp_path)
    assert a_code == 0 and b_code == 0
    assert kv(a_out)["fingerprint"] == kv(b_out)["fingerprint"]
    a_code, _, b_code, b_out = _exchange(tmp_path, "--tamper-bit", "-1")
    assert a_code == 6 and b_code == 6 and kv(b_out)["match"] == "no"
