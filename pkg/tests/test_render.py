"""SVG emitter: structure and byte determinism."""

import re

from mcmosaic.core import RngStream, WeightedConfig, sample_clocks
from mcmosaic.dynamics import run_trajectory
from mcmosaic.render import render_svg, save_svg


def _traj(seed=2, n=5, q=3.0):
    cfg = WeightedConfig(tuple(RngStream(seed).generator().uniform(0.5, 2.0, n)))
    clocks = sample_clocks(cfg, RngStream(seed).named("clk"))
    return run_trajectory(cfg, clocks, RngStream(seed).named("run"), q)


def test_svg_well_formed():
    svg = render_svg(_traj(), 3.0)
    assert svg.startswith("<svg ")
    assert svg.rstrip().endswith("</svg>")
    assert svg.count("<svg") == 1
    assert 'xmlns="http://www.w3.org/2000/svg"' in svg
    # one jump diagonal per rank plus baselines and the walk polyline
    assert svg.count("stroke-dasharray") == 5
    assert "<polyline" in svg


def test_svg_deterministic():
    a = render_svg(_traj(7), 2.5)
    b = render_svg(_traj(7), 2.5)
    assert a == b


def test_svg_differs_across_seeds():
    assert render_svg(_traj(1), 2.5) != render_svg(_traj(2), 2.5)


def test_shading_adds_polygons():
    t = _traj(4)
    plain = render_svg(t, 3.0)
    shaded = render_svg(t, 3.0, shade_slices=True)
    assert "<polygon" not in plain
    assert shaded.count("<polygon") >= len(t.config.masses)
    # everything in the plain file survives shading (shapes only added)
    assert plain.count("<line") == shaded.count("<line")


def test_no_negative_zero_coordinates():
    svg = render_svg(_traj(9), 3.0, shade_slices=True)
    assert "-0.00" not in svg
    for m in re.finditer(r'width="(\d+)" height="(\d+)"', svg):
        assert int(m.group(1)) > 0 and int(m.group(2)) > 0


def test_custom_dimensions():
    svg = render_svg(_traj(), 3.0, width=300, height=200)
    assert 'width="300"' in svg
    assert 'height="200"' in svg
    assert 'viewBox="0 0 300 200"' in svg


def test_single_vertex():
    cfg = WeightedConfig((1.25,))
    clocks = sample_clocks(cfg, RngStream(0).named("c"))
    t = run_trajectory(cfg, clocks, RngStream(0).named("r"), 1.0)
    svg = render_svg(t, 1.0)
    assert svg.count("stroke-dasharray") == 1


def test_save_svg_round_trip(tmp_path):
    svg = render_svg(_traj(), 3.0)
    out = tmp_path / "walk.svg"
    save_svg(svg, out)
    assert out.read_text() == svg
