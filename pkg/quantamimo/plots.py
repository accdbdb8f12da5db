"""
SVG rendering of sweep curves and scatter panels. Plotting only reads results.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# stable element ids across runs
matplotlib.rcParams["svg.hashsalt"] = "quantamimo"

AXIS_LABELS = {
    "snr_db": "SNR [dB]",
    "antennas": "number of BS antennas N",
    "coherence": "coherence interval T",
    "sir_db": "SIR [dB]",
    "spread_m": "distance spread [m]",
}


def variant_label(variant) -> str:
    if variant.bits == 0:
        resolution = "inf. precision"
    else:
        resolution = "{}-bit".format(variant.bits)
    label = "{} {} {}".format(
        variant.constellation.upper(), variant.detector.upper(), resolution
    )
    if variant.csi != "estimated":
        label += " ({} CSI)".format(variant.csi)
    return label


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_sweep(result, path, title=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for variant in result.variants():
        rows = [result.row(value, variant) for value in result.values]
        (line,) = ax.plot(
            result.values,
            [row.estimate.rate for row in rows],
            marker="o",
            markersize=3,
            label=variant_label(variant),
        )
        if all(row.approx is not None for row in rows):
            ax.plot(
                result.values,
                [row.approx.rate for row in rows],
                linestyle="--",
                color=line.get_color(),
                label=variant_label(variant) + " approx.",
            )
    ax.set_xlabel(AXIS_LABELS.get(result.sweep_var, result.sweep_var))
    ax.set_ylabel("rate [bit/channel use]")
    if title:
        ax.set_title(title)
    ax.grid(True, linewidth=0.3)
    ax.legend(fontsize="small")
    return _save(fig, path)


def plot_scatter(pairs, path, title=None):
    fig, ax = plt.subplots(figsize=(4.4, 4.4))
    soft = [p[1] for p in pairs]
    ax.scatter([s.real for s in soft], [s.imag for s in soft], s=1, alpha=0.5)
    ax.set_xlabel("real part")
    ax.set_ylabel("imaginary part")
    ax.set_aspect("equal", adjustable="datalim")
    if title:
        ax.set_title(title, fontsize="small")
    ax.grid(True, linewidth=0.3)
    return _save(fig, path)


def plot_quantizer_table(rows, path):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for row in rows:
        ax.plot(row.labels, [row.bits] * len(row.labels), "o", markersize=4)
        ax.plot(row.thresholds, [row.bits] * len(row.thresholds), "|", markersize=10)
    ax.set_xlabel("amplitude")
    ax.set_ylabel("resolution [bits]")
    ax.grid(True, linewidth=0.3)
    return _save(fig, path)
