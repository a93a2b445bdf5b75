"""SVG figure emission for sweep and calibration artifacts.

All figures are derived from the persisted JSON artifacts, never from live
state, so every plot is regenerable offline. The SVG hash salt is pinned to
the run seed to keep output stable across regenerations.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .irm import CalCurve, LogisticFit, PolyFit  # noqa: E402


def _new_figure(seed: int):
    plt.rcParams["svg.hashsalt"] = str(seed)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    return fig, ax


def plot_temperature_sweep(sweep: dict, path: str | Path, seed: int = 0) -> None:
    """RMSE and MAE versus temperature, best temperature marked."""
    points = [p for p in sweep["points"] if p["rmse"] is not None]
    temps = [p["temperature"] for p in points]
    fig, ax = _new_figure(seed)
    ax.plot(temps, [p["rmse"] for p in points], "o-", label="RMSE")
    ax.plot(temps, [p["mae"] for p in points], "s--", label="MAE")
    ax.axvline(sweep["best_temperature"], color="tab:red", ls=":",
               label=f"best T = {sweep['best_temperature']}")
    ax.set_xlabel("temperature")
    ax.set_ylabel("error (grade points)")
    ax.set_title("Grading error vs decoding temperature")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _curve_from_json(mode: str, cal: dict) -> CalCurve:
    section = cal[mode]
    log = section["logistic"]
    poly = section["poly"]
    return CalCurve(
        mode=mode,
        rmse_fit=LogisticFit(L=log["L"], k=log["k"], t0=log["t0"],
                             residual_rms=log["residual_rms"],
                             degenerate=log["degenerate"]),
        penalty_fit=PolyFit(coeffs=tuple(poly["coeffs"]),
                            residual_rms=poly["residual_rms"]),
        domain=(cal["domain"][0], cal["domain"][1]),
    )


def plot_calibration_fits(cal: dict, mode: str, path: str | Path, seed: int = 0) -> None:
    """Fitted RMSE curve and penalty curve over the sweep scatter."""
    curve = _curve_from_json(mode, cal)
    sweep = cal["sweep"]
    y_key = "Z_E" if mode == "scal" else "E_prime"
    xs_data = [p["S_k"] for p in sweep if p[y_key] is not None]
    ys_data = [p[y_key] for p in sweep if p[y_key] is not None]
    xs = np.linspace(curve.domain[0], curve.domain[1], 400)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.5))
    plt.rcParams["svg.hashsalt"] = str(seed)
    label = "standardized RMSE" if mode == "scal" else "normalized RMSE"
    ax1.plot(xs_data, ys_data, "o", ms=3, label=label)
    ax1.plot(xs, curve.rmse_fit.value(xs), "-", label="logistic fit")
    ax1.set_xlabel("indecisiveness threshold")
    ax1.set_ylabel(label)
    ax1.legend()
    ax2.plot([p["S_k"] for p in sweep], [p["penalty"] for p in sweep],
             "o", ms=3, label="penalty")
    ax2.plot(xs, curve.penalty_fit.value(xs), "-", label="degree-4 fit")
    ax2.set_xlabel("indecisiveness threshold")
    ax2.set_ylabel("routed fraction penalty")
    ax2.legend()
    fig.suptitle(f"Curve fits ({mode})")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_cal_curve(cal: dict, mode: str, path: str | Path, seed: int = 0) -> None:
    """The combined confidence-aware loss with its selected operating point."""
    curve = _curve_from_json(mode, cal)
    xs = np.linspace(curve.domain[0], curve.domain[1], 400)
    fig, ax = _new_figure(seed)
    ax.plot(xs, curve.value(xs), "-", label=f"{mode} loss")
    optimum = cal["optimal_is_scal"] if mode == "scal" else cal["optimal_is_ncal"]
    kind = "minimum" if mode == "scal" else "first inflection"
    ax.axvline(optimum, color="tab:red", ls=":", label=f"{kind} = {optimum:.4f}")
    ax.set_xlabel("indecisiveness threshold")
    ax.set_ylabel("confidence-aware loss")
    ax.set_title(f"{mode} loss over the threshold sweep")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
