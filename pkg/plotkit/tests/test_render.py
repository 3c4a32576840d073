import math

import pytest

from plotkit.dataset import EmptyDatasetError, load_dataset
from plotkit.render import aggregate_series, render

from conftest import write_sweep_csv


def snr_path_rows():
    rows = []
    for num_paths, base in ((2, 0.01), (3, 0.02), (4, 0.04)):
        for snr in (0.0, 10.0, 20.0):
            for trial, factor in enumerate((0.5, 1.5)):  # mean = base * 10^(-snr/10)
                rows.append({
                    "trial": trial,
                    "snr_db": snr,
                    "L": num_paths,
                    "nmse_A": base * factor * 10 ** (-snr / 10),
                    "sweep_id": f"L{num_paths}_snr{snr:g}",
                })
    return rows


def test_grouping_and_mean_in_linear_domain(tmp_path):
    path = write_sweep_csv(tmp_path / "snr.csv", snr_path_rows())
    series = aggregate_series(load_dataset(path), "snr_paths")
    assert sorted(series) == ["L=2", "L=3", "L=4"]
    snrs, values = series["L=3"]
    assert snrs == [0.0, 10.0, 20.0]
    # mean of (0.5, 1.5) * base is exactly base
    expected = [10 * math.log10(0.02 * 10 ** (-s / 10)) for s in snrs]
    assert values == pytest.approx(expected)


def test_antenna_grouping(tmp_path):
    rows = [{"rx_nx": 4, "rx_nz": 4, "nmse_A": 0.1},
            {"rx_nx": 6, "rx_nz": 6, "nmse_A": 0.05}]
    path = write_sweep_csv(tmp_path / "ant.csv", rows)
    series = aggregate_series(load_dataset(path), "antennas")
    assert sorted(series) == ["rx 4x4", "rx 6x6"]


def test_metric_selection(tmp_path):
    path = write_sweep_csv(tmp_path / "m.csv", [{"nmse_B": 0.25}])
    series = aggregate_series(load_dataset(path), "snr_paths", metric="nmse_B")
    assert series["L=3"][1] == pytest.approx([10 * math.log10(0.25)])
    with pytest.raises(ValueError):
        aggregate_series(load_dataset(path), "snr_paths", metric="wall_ms")


def test_unknown_kind_rejected(tmp_path):
    path = write_sweep_csv(tmp_path / "k.csv", [{}])
    with pytest.raises(ValueError, match="figure kind"):
        aggregate_series(load_dataset(path), "spectrum")


def test_render_writes_image_and_returns_series(tmp_path):
    path = write_sweep_csv(tmp_path / "snr.csv", snr_path_rows())
    out = tmp_path / "fig.png"
    series = render(path, "snr_paths", out)
    assert out.exists() and out.stat().st_size > 0
    assert set(series) == {"L=2", "L=3", "L=4"}


def test_render_svg(tmp_path):
    path = write_sweep_csv(tmp_path / "snr.csv", snr_path_rows())
    out = tmp_path / "fig.svg"
    render(path, "snr_paths", out)
    assert out.read_bytes().startswith(b"<?xml")


def test_render_is_deterministic_in_data(tmp_path):
    path = write_sweep_csv(tmp_path / "snr.csv", snr_path_rows())
    s1 = render(path, "snr_paths", tmp_path / "a.png")
    s2 = render(path, "snr_paths", tmp_path / "b.png")
    assert s1 == s2


def test_empty_dataset_writes_nothing(tmp_path):
    path = write_sweep_csv(tmp_path / "empty.csv", [])
    out = tmp_path / "fig.png"
    with pytest.raises(EmptyDatasetError):
        render(path, "snr_paths", out)
    assert not out.exists()
