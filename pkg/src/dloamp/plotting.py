"""Static BER-vs-SNR figures rendered from sweep CSV files."""

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import read_csv  # noqa: E402


def plot_ber(csv_path, out_path, title: str | None = None) -> Path:
    """Semilog BER curves, one line per receiver. Format follows the file suffix."""
    groups = defaultdict(list)
    for rec in read_csv(csv_path):
        groups[rec.receiver].append(rec)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, recs in groups.items():
        recs.sort(key=lambda r: r.snr_db)
        pts = [(r.snr_db, r.ber) for r in recs if r.bit_errors > 0]
        if pts:
            ax.semilogy(*zip(*pts), marker="o", label=name)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    if groups:
        ax.legend()
    if title:
        ax.set_title(title)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata so repeated renders compare equal
    meta = {"Date": None} if out.suffix == ".svg" else {"CreationDate": None} if out.suffix == ".pdf" else {}
    fig.savefig(out, metadata=meta)
    plt.close(fig)
    return out
