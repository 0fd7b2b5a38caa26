"""Figure-style exports: archive heatmaps and level renders.

The heatmap raster is built by hand (cell grid to pixel blocks, a small
color ramp, labeled axes); Pillow is used only to draw label text and encode
PNG files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .grid import Game, GameSpec, Level
from .qd import Archive

EMPTY_CELL_COLOR = (40, 40, 48)
_CELL_PX = 6
_MARGIN = 42

# Dark-blue -> teal -> yellow ramp.
_RAMP = np.array(
    [(13, 8, 135), (70, 3, 159), (114, 1, 168), (156, 23, 158), (189, 55, 134),
     (216, 87, 107), (237, 121, 83), (251, 159, 58), (253, 202, 38), (240, 249, 33)],
    dtype=float,
)

TILE_COLORS = {
    Game.MAZE: ((236, 236, 228), (40, 40, 48)),
    Game.ZELDA: ((236, 236, 228), (40, 40, 48), (66, 135, 245), (240, 200, 40), (150, 90, 40), (220, 60, 60)),
    Game.SOKOBAN: ((236, 236, 228), (40, 40, 48), (66, 135, 245), (230, 140, 50), (90, 190, 90)),
}


def _colorize(norm: float) -> tuple[int, int, int]:
    x = min(max(norm, 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(x), len(_RAMP) - 2)
    frac = x - i
    rgb = _RAMP[i] * (1 - frac) + _RAMP[i + 1] * frac
    return tuple(int(round(v)) for v in rgb)


def heatmap_values(archive: Archive, metric: str) -> dict[tuple[int, ...], float]:
    """Per-occupied-cell value of the requested metric."""
    if metric not in ("objective", "diversity", "occupancy"):
        raise ValueError(f"unknown heatmap metric {metric!r}")
    out = {}
    for cell, elite in archive.items():
        if metric == "objective":
            out[cell] = float(elite.stats.objective)
        elif metric == "diversity":
            out[cell] = float(elite.stats.diversity)
        else:
            out[cell] = 1.0
    return out


def heatmap_csv_rows(archive: Archive, metric: str) -> list[list]:
    values = heatmap_values(archive, metric)
    rows = [["cell_0", "cell_1", "measure_0", "measure_1", "value", "objective"]]
    for cell, elite in archive.items():
        rows.append(
            [cell[0], cell[1], float(elite.stats.measure_means[0]), float(elite.stats.measure_means[1]),
             values[cell], float(elite.stats.objective)]
        )
    return rows


def render_heatmap(archive: Archive, metric: str, measure_names: tuple[str, str]) -> Image.Image:
    """Rasterize a 2D archive: measure 0 on the x axis, measure 1 on the y axis."""
    if len(archive.dims) != 2:
        raise ValueError("heatmap rendering requires a 2-measure archive")
    d0, d1 = archive.dims
    values = heatmap_values(archive, metric)
    lo = min(values.values()) if values else 0.0
    hi = max(values.values()) if values else 1.0
    span = (hi - lo) or 1.0

    grid = np.empty((d1, d0, 3), dtype=np.uint8)
    grid[:] = EMPTY_CELL_COLOR
    for (i0, i1), val in values.items():
        grid[d1 - 1 - i1, i0] = _colorize((val - lo) / span)
    raster = np.repeat(np.repeat(grid, _CELL_PX, axis=0), _CELL_PX, axis=1)

    img = Image.new("RGB", (raster.shape[1] + _MARGIN, raster.shape[0] + _MARGIN), (250, 250, 250))
    img.paste(Image.fromarray(raster), (_MARGIN, 0))
    draw = ImageDraw.Draw(img)
    (lo0, hi0), (lo1, hi1) = archive.bounds
    y_axis = raster.shape[0]
    draw.text((_MARGIN, y_axis + 4), f"{measure_names[0]}: {lo0:g} .. {hi0:g}", fill=(20, 20, 20))
    draw.text((2, y_axis + 18), f"{metric}: {lo:g} .. {hi:g}", fill=(20, 20, 20))
    vertical = Image.new("RGB", (y_axis, 14), (250, 250, 250))
    vdraw = ImageDraw.Draw(vertical)
    vdraw.text((2, 1), f"{measure_names[1]}: {lo1:g} .. {hi1:g}", fill=(20, 20, 20))
    img.paste(vertical.rotate(90, expand=True), (2, 0))
    return img


def export_heatmap(archive: Archive, metric: str, out_base, measure_names: tuple[str, str]) -> tuple[Path, Path | None]:
    """Write `<base>.csv` always and `<base>.png` for 2-measure archives."""
    out_base = Path(out_base)
    csv_path = out_base.with_suffix(".csv")
    rows = heatmap_csv_rows(archive, metric)
    csv_path.write_text("\n".join(",".join(str(v) for v in row) for row in rows) + "\n")
    if len(archive.dims) != 2:
        return csv_path, None
    png_path = out_base.with_suffix(".png")
    render_heatmap(archive, metric, measure_names).save(png_path)
    return csv_path, png_path


def render_level_image(level: Level, spec: GameSpec, scale: int = 16) -> Image.Image:
    colors = np.array(TILE_COLORS[spec.game], dtype=np.uint8)
    raster = colors[level.cells]
    raster = np.repeat(np.repeat(raster, scale, axis=0), scale, axis=1)
    return Image.fromarray(raster)
