"""Simulation traces and their CSV serialization.

Rows are one per simulation step.  Column order is fixed: time, true state,
estimate, true measurement, injected measurement, desired and actual control,
true and perceived margins, alignment statistic and its moving average, then
the six status flags.  Flags are stored as 0/1.  Floats are written with
shortest round-trip precision, so re-running a configuration reproduces the
file byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FLAG_COLUMNS = (
    "alarm_mag",
    "alarm_corr",
    "attack_active",
    "cbf_active",
    "infeasible",
    "deactivated",
)


def trace_columns(n_x: int, n_y: int, n_u: int) -> tuple[str, ...]:
    cols = ["t"]
    cols += [f"x{i}" for i in range(1, n_x + 1)]
    cols += [f"xhat{i}" for i in range(1, n_x + 1)]
    cols += [f"y{i}" for i in range(1, n_y + 1)]
    cols += [f"y_injected{i}" for i in range(1, n_y + 1)]
    cols += ["u_des", "u_act"] if n_u == 1 else (
        [f"u_des{i}" for i in range(1, n_u + 1)] + [f"u_act{i}" for i in range(1, n_u + 1)]
    )
    cols += ["hS_x", "hS_xhat", "rho", "rho_ma"]
    cols += list(FLAG_COLUMNS)
    return tuple(cols)


@dataclass
class SimulationTrace:
    """Column-named view over the (rows, columns) result array."""

    columns: tuple[str, ...]
    data: np.ndarray
    n_x: int
    n_y: int
    n_u: int
    dt: float

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise KeyError(f"no trace column named {name!r}") from None
        return self.data[:, idx]

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]


def write_trace(trace: SimulationTrace, path) -> None:
    """Write the trace as UTF-8 CSV; flags as 0/1, floats shortest round-trip."""
    flag_idx = {trace.columns.index(name) for name in FLAG_COLUMNS if name in trace.columns}
    lines = [",".join(trace.columns)]
    for row in trace.data:
        fields = [
            str(int(v)) if j in flag_idx else repr(float(v))
            for j, v in enumerate(row)
        ]
        lines.append(",".join(fields))
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines))
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
