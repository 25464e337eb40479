"""Run metrics: decay-rate fitting and the metrics file writer."""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

FLOOR = 1e-14


def peak_indices(values):
    """Indices of strict-or-flat local maxima of |values|."""
    v = np.abs(np.asarray(values, dtype=float))
    if v.shape[0] < 3:
        return np.array([], dtype=int)
    mask = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])
    return np.where(mask)[0] + 1


def estimate_decay(times, values, window, envelope=False):
    """Fitted exponential decay rate of |values| over the window (sign-flipped
    log-linear slope). With `envelope`, the fit runs on the peak envelope so
    an oscillating-but-decaying signal is not biased by its zero crossings.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    t0, t1 = window
    mask = (times >= t0) & (times <= t1)
    if mask.sum() < 10:
        raise ContractError("decay window holds fewer than 10 samples")
    t_sel = times[mask]
    v_sel = np.abs(values[mask])
    if np.all(v_sel < FLOOR):
        raise ContractError("signal below the numerical floor everywhere in the window")
    if envelope:
        peaks = peak_indices(v_sel)
        if peaks.shape[0] >= 3:
            t_sel = t_sel[peaks]
            v_sel = v_sel[peaks]
    keep = v_sel > FLOOR
    t_sel = t_sel[keep]
    v_sel = v_sel[keep]
    if t_sel.shape[0] < 2 or t_sel[-1] == t_sel[0]:
        raise ContractError("degenerate decay window")
    slope = np.polyfit(t_sel, np.log(v_sel), 1)[0]
    return float(-slope)


@dataclass
class RunMetrics:
    decay_rate: float
    terminal_theta_err: float
    max_abs_w: float
    margin_phi: float
    margin_observer: float
    wall_clock_s: float
    clamped_steps: int

    def lines(self):
        return [
            f"decay_rate = {self.decay_rate:.17g}",
            f"terminal_theta_err = {self.terminal_theta_err:.17g}",
            f"max_abs_w = {self.max_abs_w:.17g}",
            f"margin_phi = {self.margin_phi:.17g}",
            f"margin_observer = {self.margin_observer:.17g}",
            f"wall_clock_s = {self.wall_clock_s:.17g}",
            f"clamped_steps = {self.clamped_steps}",
        ]


def write_metrics(path, metrics: RunMetrics):
    with open(path, "w") as fh:
        fh.write("\n".join(metrics.lines()) + "\n")
