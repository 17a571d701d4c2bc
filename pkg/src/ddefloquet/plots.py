"""Figure rendering for the command-line reports.

All functions write a PNG file and return its path; the library modules
themselves never import matplotlib."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def acs_figure(acs_result, path, title="asymptotic continuous spectrum"):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    for br in acs_result.branches:
        w, g, p = br.arrays()
        style = dict(lw=2, color="tab:red") if br.critical else dict(lw=1)
        ax1.plot(w, g, **style)
        ax2.plot(w, (p + np.pi) % (2 * np.pi) - np.pi, ".", ms=2)
    ax1.axhline(0.0, color="k", lw=0.5)
    ax1.set_xlabel(r"$\omega$")
    ax1.set_ylabel(r"$\gamma$")
    ax1.set_title(title)
    ax2.set_xlabel(r"$\omega$")
    ax2.set_ylabel(r"$\varphi$ (wrapped)")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def floquet_figure(sets, path):
    """Exponent scatter per delay count; sets is a list of FloquetSet."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for fs in sets:
        mus = np.array(fs.mus())
        ax.plot(mus.real, mus.imag, "o", ms=3, label=f"N={fs.n_delay}")
    ax.axvline(0.0, color="k", lw=0.5)
    ax.set_xlabel(r"Re $\mu$")
    ax.set_ylabel(r"Im $\mu$")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("Floquet exponents")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def orbit_figure(orbit, path):
    s = np.linspace(0, 1, 512, endpoint=False)
    prof = np.array([orbit.eval(v) for v in s])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    if prof.shape[1] >= 2:
        ax1.plot(prof[:, 0], prof[:, 1], lw=1)
        ax1.set_xlabel("x")
        ax1.set_ylabel("y")
        ax1.set_aspect("equal", adjustable="datalim")
    else:
        ax1.plot(s, prof[:, 0], lw=1)
    ax1.set_title(f"orbit, T = {orbit.period:.6f}")
    for j in range(prof.shape[1]):
        ax2.plot(s, prof[:, j], lw=1, label=f"component {j}")
    ax2.set_xlabel("t / T")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def trajectory_figure(traj, path, distances=None):
    fig, axes = plt.subplots(1, 2 if distances is not None else 1,
                             figsize=(9 if distances is not None else 6, 3.6),
                             squeeze=False)
    ax = axes[0, 0]
    ax.plot(traj.times, traj.log_norms(), lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("log ||x||")
    ax.set_title("trajectory norm")
    if distances is not None:
        ts, dist = distances
        ax2 = axes[0, 1]
        ax2.semilogy(ts, np.maximum(dist, 1e-300), lw=0.8)
        ax2.set_xlabel("t")
        ax2.set_ylabel("distance to orbit")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
