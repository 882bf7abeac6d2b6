import json

import pytest

from agentsim.cli import EXIT_FAIL, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, main


@pytest.fixture
def chase_xml(tmp_path):
    path = tmp_path / "chase.xml"
    assert main(["scenario", "chase", "--seed", "2", "-o", str(path)]) == EXIT_OK
    return path


def test_scenario_writes_a_valid_config(chase_xml, capsys):
    assert main(["validate", str(chase_xml)]) == EXIT_OK
    assert "ok (2 agents, scenario chase)" in capsys.readouterr().out


def test_run_then_replay(chase_xml, tmp_path, capsys):
    log = tmp_path / "run.log"
    assert main(["run", str(chase_xml), "--log", str(log)]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("terminated after")
    assert json.loads(out[1])["caught"] is True
    assert main(["replay", str(log), str(chase_xml)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS")

    lines = log.read_text().splitlines()
    log.write_text("\n".join(lines[: len(lines) // 2]) + "\n")
    assert main(["replay", str(log), str(chase_xml)]) == EXIT_PARTIAL


def test_replay_refused_for_another_config(chase_xml, tmp_path):
    log = tmp_path / "run.log"
    main(["run", str(chase_xml), "--log", str(log)])
    other = tmp_path / "other.xml"
    main(["scenario", "chase", "--set", "near=2.0", "-o", str(other)])
    assert main(["replay", str(log), str(other)]) == EXIT_USAGE


def test_validate_reports_problems(tmp_path, capsys):
    bad = tmp_path / "bad.xml"
    bad.write_text("<run seed='1'><world w='1' h='1'></run>")
    assert main(["validate", str(bad)]) == EXIT_FAIL
    assert "xml" in capsys.readouterr().err


def test_scenario_rejects_bad_parameters(capsys):
    assert main(["scenario", "mushrooms", "--set", "agents=9"]) == EXIT_USAGE
    assert main(["scenario", "tag"]) == EXIT_USAGE
    with pytest.raises(SystemExit):
        main(["scenario", "chase", "--set", "oops"])


def test_run_with_trace(chase_xml, tmp_path, capsys):
    log = tmp_path / "run.log"
    out = tmp_path / "svg"
    assert main(["run", str(chase_xml), "--ticks", "20", "--log", str(log), "--trace", str(out),
                 "--every", "10"]) == EXIT_OK
    assert len(list(out.glob("*.svg"))) >= 2
    assert main(["render", str(log), "--out", str(tmp_path / "ov"), "--overview"]) == EXIT_OK
    assert len(list((tmp_path / "ov").glob("*.svg"))) == 1
    assert main(["render", str(log), "--every", "0"]) == EXIT_USAGE


def test_missing_file_is_an_error(tmp_path, capsys):
    assert main(["render", str(tmp_path / "nope.log")]) == EXIT_FAIL
