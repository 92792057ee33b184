import shutil
from pathlib import Path

import pytest

from smilefigs.render import main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fx(*names):
    return ",".join(str(FIXTURES / n) for n in names)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


FIG1_INPUTS = fx("fig1_rm09_h000.csv", "fig1_rm09_h050.csv",
                 "fig1_rp09_h000.csv", "fig1_rp09_h050.csv")
FIG2_INPUTS = fx("fig2_rp00_h005.csv", "fig2_rp00_h020.csv",
                 "fig2_rp00_h050.csv", "fig2_rm09_h005.csv",
                 "fig2_rm09_h020.csv", "fig2_rm09_h050.csv")
FIG3_INPUTS = fx("fig3_h005_ode.csv", "fig3_h005_approx.csv",
                 "fig3_h025_ode.csv", "fig3_h025_approx.csv")
SEVEN_FIGURES = [
    ("fig1", FIG1_INPUTS, "fig1.png"),
    ("fig2", FIG2_INPUTS, "fig2.png"),
    ("fig3", FIG3_INPUTS, "fig3.png"),
    ("fig4-6", fx("fig4_h005_rm09.csv", "fig4_h005_rp00.csv"), "fig4.png"),
    ("fig4-6", fx("fig5_h010_rm09.csv", "fig5_h010_rp00.csv"), "fig5.png"),
    ("fig4-6", fx("fig6_h020_rm09.csv", "fig6_h020_rp00.csv"), "fig6.png"),
    ("fig7", fx("fig7_power.csv"), "fig7.png"),
]


@pytest.mark.parametrize("figure,inputs,out_name", SEVEN_FIGURES,
                         ids=[s[2] for s in SEVEN_FIGURES])
def test_renders_figure(capsys, tmp_path, figure, inputs, out_name):
    out = tmp_path / out_name
    code, stdout, stderr = run(capsys, ["--figure", figure, "--inputs", inputs,
                                        "--out", str(out)])
    assert code == 0 and stderr == ""
    assert f"wrote {out}" in stdout
    assert out.exists() and out.stat().st_size > 5000


def test_rerender_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for out in (a, b):
        code, _, _ = run(capsys, ["--figure", "fig7",
                                  "--inputs", fx("fig7_power.csv"),
                                  "--out", str(out)])
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_missing_column_names_it(capsys, tmp_path):
    src = (FIXTURES / "fig7_power.csv").read_text().splitlines()
    header = src[0].split(",")
    drop = header.index("mc_iv_normalized")
    broken = tmp_path / "broken.csv"
    broken.write_text("\n".join(
        ",".join(c for i, c in enumerate(line.split(",")) if i != drop)
        for line in src) + "\n")
    code, _, err = run(capsys, ["--figure", "fig7", "--inputs", str(broken),
                                "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert err.startswith("schema_error:")
    assert "mc_iv_normalized" in err


def test_ode_table_rejected_for_smile_figure(capsys, tmp_path):
    code, _, err = run(capsys, ["--figure", "fig4-6",
                                "--inputs", fx("fig2_rp00_h020.csv"),
                                "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "missing column" in err


def test_missing_input_file_exits_4(capsys, tmp_path):
    code, _, err = run(capsys, ["--figure", "fig7",
                                "--inputs", str(tmp_path / "nope.csv"),
                                "--out", str(tmp_path / "x.png")])
    assert code == 4
    assert err.startswith("io_error:")


def test_odd_pair_count_rejected(capsys, tmp_path):
    code, _, err = run(capsys, ["--figure", "fig3",
                                "--inputs", fx("fig3_h005_ode.csv"),
                                "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "pairs" in err


def test_renders_without_sidecar(capsys, tmp_path):
    # labels fall back to generic text when the meta.json is absent
    for name in ("fig1_rm09_h000.csv", "fig1_rm09_h050.csv"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    out = tmp_path / "fig1.png"
    inputs = ",".join(str(tmp_path / n)
                      for n in ("fig1_rm09_h000.csv", "fig1_rm09_h050.csv"))
    code, _, _ = run(capsys, ["--figure", "fig1", "--inputs", inputs,
                              "--out", str(out)])
    assert code == 0
    assert out.exists()
