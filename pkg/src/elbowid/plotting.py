"""Optional SVG line charts of report plot data (needs matplotlib)."""

from __future__ import annotations

from pathlib import Path

_LABELS = {
    "t": "time [s]", "f": "frequency [Hz]", "I": "inertia [kg m^2/rad]",
    "target": "target angle [rad]", "K": "stiffness [N m/rad]", "B": "viscosity [N m s/rad]",
}


def _axes_for(name, series):
    keys = list(series)
    x, ys = keys[0], keys[1:]
    if name == "sii_impedance_vs_target":
        return x, [["K"], ["B"]]
    if name == "dii_movement":
        return x, [["reference", "perturbed", "command"], ["torque"]]
    return x, [ys]


def write_svgs(report, out_dir) -> list:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError("SVG output needs matplotlib (pip install elbowid[plots])") from exc

    out_dir = Path(out_dir)
    paths = []
    for name, series in report.plots.items():
        x, groups = _axes_for(name, series)
        fig, axes = plt.subplots(len(groups), 1, figsize=(6, 3 * len(groups)), squeeze=False)
        for ax, group in zip(axes[:, 0], groups):
            for key in group:
                ax.plot(series[x], series[key], label=key)
            ax.set_xlabel(_LABELS.get(x, x))
            if len(group) == 1:
                ax.set_ylabel(_LABELS.get(group[0], group[0]))
            else:
                ax.legend()
        fig.suptitle(name)
        fig.tight_layout()
        path = out_dir / f"{name}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
