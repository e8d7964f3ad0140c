"""Figure rendering for the report path.

Each experiment that writes a delimited file can render a companion PNG
next to it (same stem).  matplotlib is imported lazily with the Agg
backend so the computational modules never pay for it and headless runs
are identical to interactive ones.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

FIG_DPI = 150


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams.update({
        "figure.figsize": (8.0, 5.0),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 10,
    })
    return plt


def figure_path(out_path) -> Path:
    return Path(out_path).with_suffix(".png")


def save(fig, out_path) -> Path:
    target = figure_path(out_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, dpi=FIG_DPI, metadata={"Software": "classd"})
    return target


def render(experiment: str, records: list[dict], metadata: dict, out_path) -> Path | None:
    """Dispatch to the experiment's renderer; returns the figure path."""
    renderer = _RENDERERS.get(experiment)
    if renderer is None or not records:
        return None
    plt = _pyplot()
    fig = renderer(plt, records, metadata)
    path = save(fig, out_path)
    plt.close(fig)
    return path


def _col(records, key, default=np.nan):
    return np.array([r.get(key, default) for r in records], dtype=float)


def _render_steady(plt, records, metadata):
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    t = _col(records, "t") * 1e6
    ax1.plot(t, _col(records, "m"), label="compensator output m")
    ax1.set_ylabel("m(t)")
    ax1.legend(loc="upper right")
    ax1.set_title(
        f"periodic operating point: duty={metadata.get('duty_cycle'):.4f}, "
        f"kappa={metadata.get('kappa'):.6f}"
    )
    ax2.plot(t, _col(records, "f"), color="C1", label="filter output f")
    ax2.set_xlabel("t (us)")
    ax2.set_ylabel("f(t)")
    ax2.legend(loc="upper right")
    fig.tight_layout()
    return fig


def _render_stability(plt, records, metadata):
    fig, ax = plt.subplots(figsize=(6, 6))
    theta = np.linspace(0, 2 * np.pi, 256)
    ax.plot(np.cos(theta), np.sin(theta), "k--", lw=0.8, label="unit circle")
    re = _col(records, "eig_re")
    im = _col(records, "eig_im")
    ax.scatter(re, im, c="C0", zorder=3)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_aspect("equal")
    ax.set_title(
        f"period-map eigenvalues (radius {metadata.get('spectral_radius'):.5f}, "
        f"{'stable' if metadata.get('stable') else 'unstable'})"
    )
    ax.legend(loc="upper left")
    fig.tight_layout()
    return fig


def _render_sweep(plt, records, metadata):
    param = metadata.get("sweep.parameter", "parameter")
    ok = [r for r in records if r.get("error") == ""]
    fig, axes = plt.subplots(1, 2, figsize=(11, 5))

    values = np.array([r[param] for r in ok])
    if any("thd" in r for r in ok):
        ax = axes[0]
        with np.errstate(divide="ignore"):
            ax.plot(values, np.log10(_col(ok, "thd")), "o-", label="THD")
            for n in (2, 3, 4):
                ax.plot(values, np.log10(_col(ok, f"h{n}")), ".-",
                        label=f"harmonic {n}", alpha=0.7)
        ax.set_xlabel(param)
        ax.set_ylabel("log10 magnitude")
        ax.legend()
        ax.set_title("distortion vs parameter")
    else:
        axes[0].plot(values, _col(ok, "spectral_radius"), "o-")
        axes[0].axhline(1.0, color="k", lw=0.8, ls="--")
        axes[0].set_xlabel(param)
        axes[0].set_ylabel("spectral radius")

    ax = axes[1]
    theta = np.linspace(0, 2 * np.pi, 256)
    ax.plot(np.cos(theta), np.sin(theta), "k--", lw=0.8)
    for j in range(1, 6):
        re = _col(ok, f"eig{j}_re")
        im = _col(ok, f"eig{j}_im")
        ax.plot(re, im, ".-", ms=3, lw=0.7, label=f"branch {j}")
    ax.set_aspect("equal")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title("eigenvalue paths")
    fig.tight_layout()
    return fig


def _render_tf(plt, records, metadata):
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    f = _col(records, "f_hz")
    ax1.semilogx(f, 20 * np.log10(_col(records, "abs")))
    ax1.set_ylabel("|H| (dB)")
    ax1.set_title(f"small-signal transfer function (u0={metadata.get('u0')})")
    ax2.semilogx(f, _col(records, "phase_deg"), color="C1")
    ax2.set_xlabel("f (Hz)")
    ax2.set_ylabel("phase (deg)")
    fig.tight_layout()
    return fig


def _render_simulate(plt, records, metadata):
    fig, ax = plt.subplots()
    t = _col(records, "t_rise") * 1e3
    duty = _col(records, "duty")
    skipped = np.array([bool(r.get("skipped")) for r in records])
    ax.plot(t, duty, ".", ms=2, label="duty cycle")
    if skipped.any():
        ax.plot(t[skipped], duty[skipped], "rx", ms=5, label="skipped")
    ax.set_xlabel("t (ms)")
    ax.set_ylabel("duty cycle")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"switching record ({metadata.get('skip_count', 0)} skips)")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return fig


def _render_predict(plt, records, metadata):
    fig, ax = plt.subplots()
    n = _col(records, "n")
    mag = _col(records, "abs")
    ax.semilogy(n, np.maximum(mag, 1e-18), "o")
    ax.set_xlabel("harmonic")
    ax.set_ylabel("|coefficient|")
    ax.set_title(
        f"slow-time audio prediction, order {metadata.get('order')} "
        f"(epsilon={metadata.get('epsilon'):.4g})"
    )
    fig.tight_layout()
    return fig


def _render_compare(plt, records, metadata):
    fig, ax = plt.subplots()
    n = _col(records, "n")
    ax.semilogy(n, np.maximum(_col(records, "analytic_abs"), 1e-18), "o",
                label="analytic")
    ax.semilogy(n, np.maximum(_col(records, "simulated_abs"), 1e-18), "x",
                label="simulated")
    ax.set_xlabel("harmonic")
    ax.set_ylabel("|coefficient|")
    ax.set_title("analytic prediction vs simulation")
    ax.legend()
    fig.tight_layout()
    return fig


_RENDERERS = {
    "steady": _render_steady,
    "stability": _render_stability,
    "sweep": _render_sweep,
    "tf": _render_tf,
    "simulate": _render_simulate,
    "predict": _render_predict,
    "compare": _render_compare,
}
