"""Figure rendering for the report-producing CLI paths.

Every report command writes a delimited file plus a PNG next to it; the
figures use the non-interactive Agg backend so headless runs work.
"""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def roc_points(scores, labels):
    order = np.argsort(-np.asarray(scores))
    y = np.asarray(labels).astype(bool)[order]
    tps = np.cumsum(y)
    fps = np.cumsum(~y)
    tpr = tps / max(int(y.sum()), 1)
    fpr = fps / max(int((~y).sum()), 1)
    return np.concatenate([[0.0], fpr]), np.concatenate([[0.0], tpr])


def render_eval_figure(path, scores, labels, report):
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    if np.asarray(scores).ndim == 1:
        fpr, tpr = roc_points(scores, labels)
        axes[0].plot(fpr, tpr, lw=1.5)
        axes[0].plot([0, 1], [0, 1], "k:", lw=0.8)
        axes[0].set_xlabel("false positive rate")
        axes[0].set_ylabel("true positive rate")
        axes[0].set_title(f"ROC (AUC {report.auc:.4f})")
    else:
        scores = np.asarray(scores)
        for cls in range(scores.shape[1]):
            fpr, tpr = roc_points(scores[:, cls], np.asarray(labels) == cls)
            axes[0].plot(fpr, tpr, lw=1.0, label=f"class {cls}")
        axes[0].plot([0, 1], [0, 1], "k:", lw=0.8)
        axes[0].legend(fontsize=7)
        axes[0].set_title(f"per-class ROC (macro AUC {report.auc:.4f})")
    metrics = report.as_dict()
    names = list(metrics)
    axes[1].bar(names, [metrics[k] for k in names], color="#4878a8")
    axes[1].set_ylim(0, 1.05)
    axes[1].set_title("metrics")
    axes[1].tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_sweep_figure(path, xs, ys, xlabel, ylabel, title, logx=False):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(xs, ys, "o-", lw=1.5)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_bench_figure(path, names, times):
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.barh(names, times, color="#4878a8")
    ax.set_xlabel("seconds")
    ax.set_title("operation timings")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_size_figure(path, levels, sizes):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(levels, np.asarray(sizes) / 2**20, "o-")
    ax.set_xlabel("ciphertext level")
    ax.set_ylabel("size (MiB)")
    ax.set_title("serialized size vs level")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
