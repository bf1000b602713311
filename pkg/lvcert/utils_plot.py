"""PNG rendering of time series and phase portraits with Pillow."""

import numpy as np
from PIL import Image as PILImage, ImageDraw

PANEL_W = 640
PANEL_H = 360
MARGIN = 32
BACKGROUND = "#ffffff"
AXIS = "#888888"
COLORS = ("#1f5fbf", "#c0392b", "#2e8b57")


def _mapper(xs, ys, box):
    x0, y0, x1, y1 = box
    xmin, xmax = float(np.min(xs)), float(np.max(xs))
    ymin, ymax = float(np.min(ys)), float(np.max(ys))
    xmax = xmin + 1.0 if xmax == xmin else xmax
    ymax = ymin + 1.0 if ymax == ymin else ymax

    def to_px(x, y):
        px = x0 + (np.asarray(x) - xmin) / (xmax - xmin) * (x1 - x0)
        py = y1 - (np.asarray(y) - ymin) / (ymax - ymin) * (y1 - y0)
        return px, py

    return to_px, (xmin, xmax, ymin, ymax)


def _polyline(draw, px, py, color):
    draw.line(list(zip(px.tolist(), py.tolist())), fill=color, width=1)


def _frame(draw, box, extent, labels):
    x0, y0, x1, y1 = box
    draw.rectangle(box, outline=AXIS)
    xmin, xmax, ymin, ymax = extent
    draw.text((x0, y1 + 4), f"{xmin:.3g}", fill=AXIS)
    draw.text((x1 - 40, y1 + 4), f"{xmax:.3g}", fill=AXIS)
    draw.text((x0 - MARGIN + 2, y0), f"{ymax:.3g}", fill=AXIS)
    draw.text((x0 - MARGIN + 2, y1 - 10), f"{ymin:.3g}", fill=AXIS)
    draw.text((x0 + 4, y0 + 4), labels, fill=AXIS)


def render_series(t, series, phase=True, title=""):
    """Time series panel plus (for two components) a phase portrait.

    Args:
        t (numpy.ndarray): Times.
        series (numpy.ndarray): Shape ``(dim, n)``.
        phase (bool): Add the ``(y1, y2)`` panel when ``dim == 2``.
        title (str): Label drawn in the first panel.

    Returns:
        PIL.Image.Image: RGB image.
    """
    series = np.atleast_2d(series)
    with_phase = phase and series.shape[0] == 2
    width = PANEL_W * (2 if with_phase else 1)
    img = PILImage.new("RGB", (width, PANEL_H), BACKGROUND)
    draw = ImageDraw.Draw(img)

    box = (MARGIN, MARGIN // 2, PANEL_W - MARGIN // 2, PANEL_H - MARGIN)
    to_px, extent = _mapper(t, series, box)
    for i, ys in enumerate(series):
        px, py = to_px(t, ys)
        _polyline(draw, px, py, COLORS[i % len(COLORS)])
    _frame(draw, box, extent, title)

    if with_phase:
        box = (PANEL_W + MARGIN, MARGIN // 2, width - MARGIN // 2, PANEL_H - MARGIN)
        to_px, extent = _mapper(series[0], series[1], box)
        px, py = to_px(series[0], series[1])
        _polyline(draw, px, py, COLORS[2])
        _frame(draw, box, extent, "phase portrait")
    return img


def save_trajectory_png(traj, path, max_points=4000):
    stride = max(1, traj.t.size // max_points)
    render_series(traj.t[::stride], traj.y[:, ::stride], title=f"frame {traj.frame}").save(path)


def save_orbit_png(solution, path, points=512):
    s = np.linspace(0.0, 2.0 * np.pi, points)
    values = solution.loop.value_at(s)
    render_series(s * solution.lam, values, title=f"period {solution.period:.6g}").save(path)
