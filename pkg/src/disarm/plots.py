"""Figure rendering for simulation reports.

Draws the two headline views from the round logs next to the CSV output:
cumulative mean utility gain per policy, and storage growth against the
centralized counter.  Uses the Agg backend; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from disarm.testbed import POLICIES, RoundLog, storage_metrics

POLICY_STYLE = {
    "disarm_t1": ("tab:blue", "-"),
    "disarm_t2": ("tab:green", "-"),
    "disarm_t3": ("tab:purple", "-"),
    "direct": ("tab:orange", "--"),
    "none": ("tab:red", ":"),
}


def _cumulative_means(logs: list[RoundLog], policy: str) -> list[float]:
    out, total, count = [], 0.0, 0
    for log in logs:
        for ug in log.policy_ug.get(policy, ()):
            total += ug
            count += 1
        out.append(total / count if count else 0.0)
    return out


def plot_utility(logs: list[RoundLog], path: str | Path,
                 policies: tuple[str, ...] = POLICIES) -> Path:
    """Cumulative mean UG per policy over rounds."""
    fig, ax = plt.subplots(figsize=(8, 5))
    rounds = [log.round for log in logs]
    for policy in policies:
        color, style = POLICY_STYLE.get(policy, ("gray", "-"))
        ax.plot(rounds, _cumulative_means(logs, policy), style, color=color,
                label=policy)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative mean utility gain")
    ax.set_ylim(0, 10)
    ax.set_title("Utility gain by trust policy")
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_storage(logs: list[RoundLog], path: str | Path,
                 policies: tuple[str, ...] = POLICIES) -> Path:
    """Mean stored ratings per policy vs the centralized counter."""
    fig, ax = plt.subplots(figsize=(8, 5))
    rows = storage_metrics(logs, policies)
    rounds = sorted({r["round"] for r in rows})
    for policy in policies:
        series = [r["mean_stored"] for r in rows if r["policy"] == policy]
        color, style = POLICY_STYLE.get(policy, ("gray", "-"))
        ax.plot(rounds, series, style, color=color, label=f"{policy} (mean)")
    central = {r["round"]: r["centralized_count"] for r in rows}
    ax.plot(rounds, [central[r] for r in rounds], "-", color="black",
            linewidth=2, label="centralized")
    ax.set_xlabel("round")
    ax.set_ylabel("stored ratings")
    ax.set_title("Storage growth")
    ax.legend(loc="upper left")
    ax.grid(True, alpha=0.3)
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_report_figures(logs: list[RoundLog], out_dir: str | Path,
                          policies: tuple[str, ...] = POLICIES) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [
        plot_utility(logs, out / "ug.png", policies),
        plot_storage(logs, out / "storage.png", policies),
    ]
