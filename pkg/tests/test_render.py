import math
from pathlib import Path

import pytest

from agentsim.scenarios.chase import chase_config
from agentsim.server.engine import run_to_text
from agentsim.server.render import frames, overview, render_trace
from helpers import config, spec

GOLDEN = Path(__file__).parent / "golden" / "chase_seed0_overview.svg"


def static_log(ticks=10):
    return run_to_text(config([spec("still", 5.0, 5.0)], max_ticks=ticks))[1]


def test_static_agent_is_one_disc_without_trail():
    doc = overview(static_log())
    assert doc.count('class="agent"') == 1
    assert "<polyline" not in doc
    assert doc.startswith("<svg") and doc.rstrip().endswith("</svg>")


@pytest.mark.parametrize("ticks, every", [(10, 3), (10, 5), (10, 1), (7, 10)])
def test_frame_count(ticks, every):
    assert len(frames(static_log(ticks), every)) == math.ceil(ticks / every)


def test_scene_elements():
    from importlib import resources

    from agentsim.scenarios.mushrooms import mushroom_config

    _, log = run_to_text(mushroom_config(0, mushrooms=5, max_ticks=50))
    doc = overview(log)
    assert doc.count('class="home"') == 4
    assert doc.count('class="resource"') == 5
    assert doc.count('class="agent"') == 4
    _, log = run_to_text(chase_config(0, max_ticks=5))
    assert 'class="obstacle"' not in overview(log)
    from agentsim.server.config import load_config
    c = load_config(resources.files("agentsim.assets").joinpath("relay.xml").read_text())
    assert overview(run_to_text(c)[1]).count('class="obstacle"') == 1


def test_chase_overview_matches_golden():
    _, log = run_to_text(chase_config(0))
    doc = overview(log)
    assert doc.count("<polyline") == 2
    assert doc.count('class="catch"') == 1
    assert doc == GOLDEN.read_text()


def test_render_trace_writes_files(tmp_path):
    log = static_log(10)
    paths = render_trace(log, tmp_path / "frames", every=4)
    assert [p.name for p in paths] == ["frame_00000.svg", "frame_00001.svg", "frame_00002.svg"]
    [p] = render_trace(log, tmp_path / "ov")
    assert p.name == "overview.svg" and p.read_text() == overview(log)


def test_render_trace_reports_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        render_trace(static_log(), blocker / "sub")
