"""CSV writers/readers for run artifacts. All writes are write-temp-then-rename."""

import csv
import io
import os
import tempfile

METRICS_HEADER = ["epoch", "train_loss", "test_loss", "test_acc"]
TIMING_HEADER = ["epoch", "epoch_seconds"]
HIST_HEADER = ["bin_lo", "bin_hi", "count"]


def atomic_write_text(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(v):
    """Shortest round-tripping text for a number; empty for None."""
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    atomic_write_text(path, buf.getvalue())


def read_csv_table(path):
    """Return ``(header, rows)`` with rows as lists of strings."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_metrics(path, metrics):
    rows = zip(metrics.epochs, metrics.train_loss, metrics.test_loss, metrics.test_acc)
    write_csv(path, METRICS_HEADER, [[e, float(a), float(b), float(c)] for e, a, b, c in rows])


def write_timing(path, metrics):
    write_csv(path, TIMING_HEADER, [[e, float(s)] for e, s in zip(metrics.epochs, metrics.epoch_seconds)])


def read_metrics(path):
    header, rows = read_csv_table(path)
    if header != METRICS_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    return [
        {"epoch": int(r[0]), "train_loss": float(r[1]), "test_loss": float(r[2]), "test_acc": float(r[3])} for r in rows
    ]


def write_histogram(path, hist):
    rows = [[float(hist.edges[i]), float(hist.edges[i + 1]), int(hist.counts[i])] for i in range(hist.counts.size)]
    write_csv(path, HIST_HEADER, rows)


def read_histogram(path):
    header, rows = read_csv_table(path)
    if header != HIST_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    return [(float(r[0]), float(r[1]), int(r[2])) for r in rows]
