import json

import numpy as np
import pytest

from stekit.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from stekit.rng import Rng
from stekit.tensorio import encode_tensor, read_tensor, write_tensor


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_plan_reduction(capsys):
    code, out, _ = run(capsys, "plan", "(2:1)-(2:1)", "--frames", "32")
    assert code == EXIT_OK
    header, row = out.splitlines()
    assert header == "spec,reduction_pct,final_frames,tokens_out,params"
    assert row.split(",")[1] == "75.00"


def test_plan_layers(capsys):
    code, out, _ = run(capsys, "plan", "(2:1)", "--frames", "31", "--layers", "--dim", "8")
    assert code == EXIT_OK
    assert "0,31,1,16,16," in out


def test_plan_parse_error(capsys):
    code, _, err = run(capsys, "plan", "(2:1")
    assert code == EXIT_USAGE
    assert "position 4" in err


def test_param_count(capsys):
    code, out, _ = run(capsys, "param-count", "(2:2)", "--dim", "1152")
    assert code == EXIT_OK
    assert out.splitlines()[-1] == "total,2655360"


def test_param_count_semantic(capsys):
    _, out, _ = run(capsys, "param-count", "(2:2)@after", "--dim", "1152", "--dim-after", "3584")
    assert out.splitlines()[-1] == "total,25693696"


def test_ladder_default(capsys):
    code, out, _ = run(capsys, "ladder")
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert code == EXIT_OK
    assert [r[1] for r in rows] == ["0.00", "25.00", "43.75", "50.00", "75.00", "87.50", "93.75"]


def test_invalid_spec_for_width(capsys):
    code, _, err = run(capsys, "param-count", "(4:3)", "--dim", "2")
    assert code == EXIT_USAGE and "t_o*d mod n" in err


@pytest.mark.parametrize("suite", ["params", "ladder", "identity", "determinism", "oracle"])
def test_verify_suites(capsys, suite):
    code, out, _ = run(capsys, "verify", "--suite", suite)
    assert code == EXIT_OK
    lines = out.splitlines()
    assert all("status=PASS" in line for line in lines[:-1])
    assert lines[-1].startswith(f"suite={suite} summary passed=")


def test_verify_params_rows(capsys):
    _, out, _ = run(capsys, "verify", "--suite", "params")
    assert out.splitlines()[-1].endswith("passed=6/6")


def test_verify_failure_exit(capsys, monkeypatch):
    from stekit import verify
    monkeypatch.setitem(verify.SUITES, "ladder", lambda: [verify.Check("ladder", "x", False, 0)])
    code, out, _ = run(capsys, "verify", "--suite", "ladder")
    assert code == EXIT_VERIFY and "status=FAIL" in out


def test_unknown_suite(capsys):
    code, _, _ = run(capsys, "verify", "--suite", "nope")
    assert code == EXIT_USAGE


def test_forward_four_halvings(tmp_path, capsys):
    spec = "(2:1)-(2:1)-(2:1)-(2:1)"
    write_tensor(tmp_path / "in.stek", Rng(1).normal((32, 3, 4)))
    assert main(["init", spec, "--dim", "4", "--out", str(tmp_path / "w.ckpt")]) == EXIT_OK
    args = ["forward", "--input", str(tmp_path / "in.stek"), "--spec", spec,
            "--weights", str(tmp_path / "w.ckpt")]
    assert main(args + ["--out", str(tmp_path / "a.stek")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b.stek")]) == EXIT_OK
    assert read_tensor(tmp_path / "a.stek").shape == (2, 3, 4)
    assert (tmp_path / "a.stek").read_bytes() == (tmp_path / "b.stek").read_bytes()


def test_forward_identity_is_byte_identical(tmp_path):
    write_tensor(tmp_path / "in.stek", Rng(2).normal((8, 2, 6)))
    main(["init", "(2:2)", "--dim", "6", "--mode", "identity_preserving",
          "--out", str(tmp_path / "w.ckpt")])
    assert main(["forward", "--input", str(tmp_path / "in.stek"), "--spec", "(2:2)",
                 "--weights", str(tmp_path / "w.ckpt"), "--out", str(tmp_path / "o.stek")]) == 0
    assert (tmp_path / "o.stek").read_bytes() == (tmp_path / "in.stek").read_bytes()


def test_forward_truncated_input(tmp_path, capsys):
    (tmp_path / "in.stek").write_bytes(encode_tensor(np.zeros((4, 1, 2)))[:-8])
    main(["init", "(2:1)", "--dim", "2", "--out", str(tmp_path / "w.ckpt")])
    code, _, err = run(capsys, "forward", "--input", str(tmp_path / "in.stek"), "--spec", "(2:1)",
                       "--weights", str(tmp_path / "w.ckpt"), "--out", str(tmp_path / "o.stek"))
    assert code == EXIT_USAGE
    assert "expected 64 bytes, got 56" in err


def test_forward_spec_mismatch(tmp_path, capsys):
    write_tensor(tmp_path / "in.stek", np.zeros((4, 1, 2)))
    main(["init", "(2:1)", "--dim", "2", "--out", str(tmp_path / "w.ckpt")])
    code, _, err = run(capsys, "forward", "--input", str(tmp_path / "in.stek"), "--spec", "(2:2)",
                       "--weights", str(tmp_path / "w.ckpt"), "--out", str(tmp_path / "o.stek"))
    assert code == EXIT_USAGE and "'stack'" in err


def test_forward_width_mismatch(tmp_path, capsys):
    write_tensor(tmp_path / "in.stek", np.zeros((4, 1, 6)))
    main(["init", "(2:1)", "--dim", "2", "--out", str(tmp_path / "w.ckpt")])
    code, _, err = run(capsys, "forward", "--input", str(tmp_path / "in.stek"), "--spec", "(2:1)",
                       "--weights", str(tmp_path / "w.ckpt"), "--out", str(tmp_path / "o.stek"))
    assert code == EXIT_USAGE and "width" in err


def test_precision_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STEKIT_PRECISION", "f16")
    code, _, err = run(capsys, "init", "(2:1)", "--dim", "2", "--out", str(tmp_path / "w.ckpt"))
    assert code == EXIT_USAGE and "STEKIT_PRECISION" in err


def _train(tmp_path, name, capsys, config=None):
    out = tmp_path / name
    argv = ["train", "--task", "order_discrimination", "--seed", "0", "--out-dir", str(out)]
    if config is not None:
        (tmp_path / f"{name}.json").write_text(json.dumps(config))
        argv += ["--config", str(tmp_path / f"{name}.json")]
    code, _, err = run(capsys, *argv)
    return code, out, err


@pytest.mark.slow
def test_train_writes_artifacts_and_is_deterministic(tmp_path, capsys):
    code, a, _ = _train(tmp_path, "a", capsys)
    assert code == EXIT_OK
    _, b, _ = _train(tmp_path, "b", capsys)
    for name in ("stage1.ckpt", "stage2.ckpt", "losses.csv", "metrics.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    metrics = json.loads((a / "metrics.json").read_text())
    assert metrics["train_accuracy"] > 0.9
    frozen = metrics["pretrain_frozen_weights"]
    assert frozen["unchanged"] and frozen["before"] == frozen["after"]
    assert (a / "losses.csv").read_text().startswith("step,loss,stage\n0,")

    code, out, _ = run(capsys, "eval", "--weights", str(a / "stage2.ckpt"), "--count", "50")
    assert code == EXIT_OK and json.loads(out)["accuracy"] > 0.9


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_nan_abort(tmp_path, capsys):
    code, _, err = _train(tmp_path, "nan", capsys, {"pretrain_lr": float("inf"), "n_train": 4})
    assert code == EXIT_NUMERIC
    assert "non-finite" in err


def test_train_bad_config(tmp_path, capsys):
    code, _, err = _train(tmp_path, "bad", capsys, {"colour": "red"})
    assert code == EXIT_USAGE
